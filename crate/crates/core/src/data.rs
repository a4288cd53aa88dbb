//! Interaction records, CSV ingest/export, dataset statistics and splits.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Durations at or below this many seconds count as watched only when
/// played completely; longer videos need more than this many seconds.
pub const LONG_VIEW_THRESHOLD_S: f64 = 18.0;

const COMPLETE_PLAY_TOLERANCE: f64 = 1e-9;

/// One log row.
#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    pub user_id: String,
    pub item_id: String,
    /// Declared categorical features, in schema order.
    pub features: Vec<(String, String)>,
    /// Seconds played. May exceed the duration when a video is replayed.
    pub watch_time_s: f64,
    /// Video length in whole seconds, at least 1.
    pub duration_s: u32,
    pub timestamp: Option<i64>,
    /// Ground-truth interest, only known for synthetic data.
    pub true_interest: Option<bool>,
    pub feedback_flags: Vec<(String, bool)>,
}

impl Interaction {
    pub fn new(user_id: impl Into<String>, item_id: impl Into<String>, watch_time_s: f64, duration_s: u32) -> Self {
        Interaction {
            user_id: user_id.into(),
            item_id: item_id.into(),
            features: Vec::new(),
            watch_time_s,
            duration_s,
            timestamp: None,
            true_interest: None,
            feedback_flags: Vec::new(),
        }
    }

    pub fn with_timestamp(mut self, ts: i64) -> Self {
        self.timestamp = Some(ts);
        self
    }
}

/// Which extra columns a CSV carries besides the fixed ones.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSchema {
    /// Categorical feature columns, kept as opaque tokens.
    pub features: Vec<String>,
    /// Boolean feedback columns (`0`/`1`/`true`/`false`).
    pub flags: Vec<String>,
}

impl FeatureSchema {
    /// Feature columns of the KuaiRand-pure export.
    pub fn kuairand() -> Self {
        FeatureSchema {
            features: [
                "author_id",
                "music_id",
                "video_type",
                "upload_type",
                "tab",
                "is_like",
                "is_follow",
                "is_comment",
                "is_forward",
                "is_profile_enter",
                "is_hate",
                "most_popular_tag",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            flags: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestOptions {
    /// Cap watch time at the duration. Off by default: replays are kept.
    pub clip_watch_time: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub rows: Vec<Interaction>,
}

impl Dataset {
    pub fn new(schema: FeatureSchema, rows: Vec<Interaction>) -> Self {
        Dataset { schema, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn watch_times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.watch_time_s).collect()
    }

    pub fn durations(&self) -> Vec<u32> {
        self.rows.iter().map(|r| r.duration_s).collect()
    }

    pub fn user_ids(&self) -> Vec<&str> {
        self.rows.iter().map(|r| r.user_id.as_str()).collect()
    }

    /// Rows picked by index, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Row indices grouped by duration, ascending.
    pub fn duration_groups(&self) -> BTreeMap<u32, Vec<usize>> {
        let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, row) in self.rows.iter().enumerate() {
            groups.entry(row.duration_s).or_default().push(i);
        }
        groups
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n: usize,
    pub w_max: f64,
    pub duration_min: u32,
    pub duration_max: u32,
    pub group_counts: BTreeMap<u32, usize>,
}

pub fn ingest_csv(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Dataset> {
    ingest_csv_with(path, schema, IngestOptions::default())
}

pub fn ingest_csv_with(path: impl AsRef<Path>, schema: &FeatureSchema, options: IngestOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema, options)
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn required(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    column(headers, name).ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn parse_bool(raw: &str) -> Option<bool> {
    match raw.trim() {
        "1" | "true" | "True" | "TRUE" => Some(true),
        "0" | "false" | "False" | "FALSE" => Some(false),
        _ => None,
    }
}

/// Parses a dataset from CSV bytes. Header names are matched exactly; column
/// order is free.
pub fn read_csv<R: Read>(reader: R, schema: &FeatureSchema, options: IngestOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();

    let user_col = required(&headers, "user_id")?;
    let item_col = required(&headers, "item_id")?;
    let duration_col = required(&headers, "duration_s")?;
    let watch_col = required(&headers, "watch_time_s")?;
    let ts_col = column(&headers, "timestamp");
    let interest_col = column(&headers, "true_interest");
    let feature_cols = schema
        .features
        .iter()
        .map(|f| required(&headers, f))
        .collect::<Result<Vec<_>>>()?;
    let flag_cols = schema
        .flags
        .iter()
        .map(|f| required(&headers, f))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |reason: String| Error::MalformedRow { line, reason };
        let field = |idx: usize| record.get(idx).unwrap_or("").trim();

        let watch_raw = field(watch_col);
        if watch_raw.is_empty() {
            return Err(bad("missing watch_time_s".into()));
        }
        let mut watch: f64 = watch_raw
            .parse()
            .map_err(|_| bad(format!("watch_time_s `{watch_raw}` is not a number")))?;
        if !watch.is_finite() || watch < 0.0 {
            return Err(bad(format!("watch_time_s {watch} must be finite and non-negative")));
        }

        let duration_raw = field(duration_col);
        if duration_raw.is_empty() {
            return Err(bad("missing duration_s".into()));
        }
        let duration: f64 = duration_raw
            .parse()
            .map_err(|_| bad(format!("duration_s `{duration_raw}` is not a number")))?;
        if !duration.is_finite() || duration.round() < 1.0 || duration.round() > u32::MAX as f64 {
            return Err(bad(format!("duration_s {duration} must be at least 1 second")));
        }
        let duration = duration.round() as u32;
        if options.clip_watch_time {
            watch = watch.min(duration as f64);
        }

        let timestamp = match ts_col.map(field) {
            None | Some("") => None,
            Some(raw) => Some(
                raw.parse::<i64>()
                    .map_err(|_| bad(format!("timestamp `{raw}` is not an integer")))?,
            ),
        };
        let true_interest = match interest_col.map(field) {
            None | Some("") => None,
            Some(raw) => Some(parse_bool(raw).ok_or_else(|| bad(format!("true_interest `{raw}` is not 0/1")))?),
        };
        let features = schema
            .features
            .iter()
            .zip(&feature_cols)
            .map(|(name, &idx)| (name.clone(), field(idx).to_string()))
            .collect();
        let feedback_flags = schema
            .flags
            .iter()
            .zip(&flag_cols)
            .map(|(name, &idx)| {
                let raw = field(idx);
                parse_bool(raw)
                    .map(|b| (name.clone(), b))
                    .ok_or_else(|| bad(format!("flag {name} `{raw}` is not boolean")))
            })
            .collect::<Result<Vec<_>>>()?;

        rows.push(Interaction {
            user_id: field(user_col).to_string(),
            item_id: field(item_col).to_string(),
            features,
            watch_time_s: watch,
            duration_s: duration,
            timestamp,
            true_interest,
            feedback_flags,
        });
    }
    Ok(Dataset::new(schema.clone(), rows))
}

/// Writes the dataset in the ingest format. Optional columns are emitted only
/// when every row carries them.
pub fn write_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut header = vec!["user_id", "item_id", "duration_s", "watch_time_s"];
    let with_ts = !dataset.rows.is_empty() && dataset.rows.iter().all(|r| r.timestamp.is_some());
    let with_interest = !dataset.rows.is_empty() && dataset.rows.iter().all(|r| r.true_interest.is_some());
    if with_ts {
        header.push("timestamp");
    }
    header.extend(dataset.schema.features.iter().map(String::as_str));
    header.extend(dataset.schema.flags.iter().map(String::as_str));
    if with_interest {
        header.push("true_interest");
    }

    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(&header)?;
    for row in &dataset.rows {
        let mut rec: Vec<String> = vec![
            row.user_id.clone(),
            row.item_id.clone(),
            row.duration_s.to_string(),
            row.watch_time_s.to_string(),
        ];
        if with_ts {
            rec.push(row.timestamp.unwrap_or_default().to_string());
        }
        rec.extend(row.features.iter().map(|(_, v)| v.clone()));
        rec.extend(row.feedback_flags.iter().map(|(_, b)| u8::from(*b).to_string()));
        if with_interest {
            rec.push(u8::from(row.true_interest.unwrap_or(false)).to_string());
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn compute_stats(dataset: &Dataset) -> Result<DatasetStats> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut group_counts = BTreeMap::new();
    let mut w_max = f64::NEG_INFINITY;
    for row in &dataset.rows {
        w_max = w_max.max(row.watch_time_s);
        *group_counts.entry(row.duration_s).or_insert(0) += 1;
    }
    Ok(DatasetStats {
        n: dataset.len(),
        w_max,
        duration_min: *group_counts.keys().next().unwrap(),
        duration_max: *group_counts.keys().next_back().unwrap(),
        group_counts,
    })
}

/// Row indices in timestamp order; equal timestamps keep file order.
fn chronological_order(dataset: &Dataset) -> Result<Vec<usize>> {
    let mut keyed = Vec::with_capacity(dataset.len());
    for (i, row) in dataset.rows.iter().enumerate() {
        keyed.push((row.timestamp.ok_or(Error::MissingTimestamps)?, i));
    }
    keyed.sort_by_key(|&(ts, _)| ts);
    Ok(keyed.into_iter().map(|(_, i)| i).collect())
}

/// Row indices of a train/validation/test partition by timestamp order.
pub fn split_indices_chronological(dataset: &Dataset, fractions: (f64, f64, f64)) -> Result<[Vec<usize>; 3]> {
    let (a, b, c) = fractions;
    if !(a > 0.0 && b > 0.0 && c > 0.0) || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidFractions(fractions));
    }
    let mut order = chronological_order(dataset)?;
    let n = order.len();
    let n_train = (((n as f64) * a).round() as usize).min(n);
    let n_val = (((n as f64) * b).round() as usize).min(n - n_train);
    let test = order.split_off(n_train + n_val);
    let val = order.split_off(n_train);
    Ok([order, val, test])
}

/// Train/validation/test partition by timestamp order.
pub fn split_chronological(dataset: &Dataset, fractions: (f64, f64, f64)) -> Result<(Dataset, Dataset, Dataset)> {
    let [train, val, test] = split_indices_chronological(dataset, fractions)?;
    Ok((dataset.subset(&train), dataset.subset(&val), dataset.subset(&test)))
}

/// Splits by calendar day counted from the first day in the log: the first
/// `train_days` days, the next `val_days`, then the next `test_days`. Rows
/// past the last window are dropped.
pub fn split_by_days(
    dataset: &Dataset,
    train_days: u32,
    val_days: u32,
    test_days: u32,
) -> Result<(Dataset, Dataset, Dataset)> {
    const DAY: i64 = 86_400;
    let order = chronological_order(dataset)?;
    let Some(&first) = order.first() else {
        return Err(Error::EmptyDataset);
    };
    let day0 = dataset.rows[first].timestamp.unwrap().div_euclid(DAY);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for i in order {
        let day = dataset.rows[i].timestamp.unwrap().div_euclid(DAY) - day0;
        let t = train_days as i64;
        let v = t + val_days as i64;
        if day < t {
            train.push(i);
        } else if day < v {
            val.push(i);
        } else if day < v + test_days as i64 {
            test.push(i);
        }
    }
    Ok((dataset.subset(&train), dataset.subset(&val), dataset.subset(&test)))
}

/// The long-view interest rule: short videos (<= 18 s) must be played to the
/// end, longer ones watched for more than 18 s.
///
/// A replay (`w > d`) on a short video counts as a complete play so the label
/// stays monotone in watch time.
pub fn derive_interest_label(interaction: &Interaction) -> bool {
    let w = interaction.watch_time_s;
    let d = interaction.duration_s as f64;
    if d <= LONG_VIEW_THRESHOLD_S {
        w >= d - COMPLETE_PLAY_TOLERANCE
    } else {
        w > LONG_VIEW_THRESHOLD_S
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Dataset> {
        read_csv(text.as_bytes(), &FeatureSchema::default(), IngestOptions::default())
    }

    #[test]
    fn ingests_valid_rows() {
        let ds =
            parse("user_id,item_id,duration_s,watch_time_s,timestamp\nu1,i1,10,3.5,1\nu1,i2,20,25,2\nu2,i1,10,0,3\n")
                .unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.rows[1].watch_time_s, 25.0);
        assert_eq!(ds.rows[2].timestamp, Some(3));
    }

    #[test]
    fn rejects_negative_watch_time() {
        let err = parse("user_id,item_id,duration_s,watch_time_s\nu1,i1,10,3\nu1,i2,10,-1\n").unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 3, .. }), "{err}");
    }

    #[test]
    fn rejects_zero_duration() {
        let err = parse("user_id,item_id,duration_s,watch_time_s\nu1,i1,0,3\n").unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 2, .. }), "{err}");
    }

    #[test]
    fn rejects_missing_watch_time() {
        let err = parse("user_id,item_id,duration_s,watch_time_s\nu1,i1,10,\n").unwrap_err();
        assert!(matches!(err, Error::MalformedRow { .. }));
    }

    #[test]
    fn missing_declared_column() {
        let schema = FeatureSchema {
            features: vec!["tab".into()],
            flags: vec![],
        };
        let err = read_csv(
            "user_id,item_id,duration_s,watch_time_s\nu1,i1,10,3\n".as_bytes(),
            &schema,
            IngestOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::MissingColumn(ref c) if c == "tab"));
    }

    #[test]
    fn durations_are_quantized_and_clipping_is_opt_in() {
        let text = "user_id,item_id,duration_s,watch_time_s\nu1,i1,9.6,30\n";
        let ds = parse(text).unwrap();
        assert_eq!(ds.rows[0].duration_s, 10);
        assert_eq!(ds.rows[0].watch_time_s, 30.0);
        let clipped = read_csv(
            text.as_bytes(),
            &FeatureSchema::default(),
            IngestOptions { clip_watch_time: true },
        )
        .unwrap();
        assert_eq!(clipped.rows[0].watch_time_s, 10.0);
    }

    #[test]
    fn stats_examples() {
        let rows = vec![
            Interaction::new("u", "a", 3.0, 10),
            Interaction::new("u", "b", 7.0, 10),
            Interaction::new("u", "c", 7.0, 20),
        ];
        let stats = compute_stats(&Dataset::new(FeatureSchema::default(), rows)).unwrap();
        assert_eq!(stats.w_max, 7.0);
        assert_eq!(stats.n, 3);
        assert_eq!(stats.group_counts, BTreeMap::from([(10, 2), (20, 1)]));
        assert_eq!((stats.duration_min, stats.duration_max), (10, 20));
        assert!(matches!(compute_stats(&Dataset::default()), Err(Error::EmptyDataset)));
    }

    fn timed(n: usize) -> Dataset {
        let rows = (0..n)
            .map(|i| Interaction::new("u", format!("i{i}"), 1.0, 5).with_timestamp(i as i64))
            .collect();
        Dataset::new(FeatureSchema::default(), rows)
    }

    #[test]
    fn chronological_split_sizes() {
        let (a, b, c) = split_chronological(&timed(10), (0.6, 0.2, 0.2)).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (6, 2, 2));
        assert_eq!(a.rows[0].item_id, "i0");
        assert_eq!(c.rows[1].item_id, "i9");
    }

    #[test]
    fn chronological_split_ties_keep_file_order() {
        let mut ds = timed(4);
        ds.rows[0].timestamp = Some(5);
        ds.rows[1].timestamp = Some(1);
        ds.rows[2].timestamp = Some(1);
        ds.rows[3].timestamp = Some(1);
        let (a, b, c) = split_chronological(&ds, (0.5, 0.25, 0.25)).unwrap();
        let ids: Vec<_> = a
            .rows
            .iter()
            .chain(&b.rows)
            .chain(&c.rows)
            .map(|r| r.item_id.as_str())
            .collect();
        assert_eq!(ids, ["i1", "i2", "i3", "i0"]);
    }

    #[test]
    fn chronological_split_needs_timestamps() {
        let mut ds = timed(3);
        ds.rows[1].timestamp = None;
        assert!(matches!(
            split_chronological(&ds, (0.6, 0.2, 0.2)),
            Err(Error::MissingTimestamps)
        ));
        assert!(matches!(
            split_chronological(&timed(3), (0.6, 0.2, 0.3)),
            Err(Error::InvalidFractions(_))
        ));
    }

    #[test]
    fn day_split() {
        let rows = (0..6)
            .map(|i| Interaction::new("u", format!("i{i}"), 1.0, 5).with_timestamp(1_000 + i * 43_200))
            .collect();
        let ds = Dataset::new(FeatureSchema::default(), rows);
        let (a, b, c) = split_by_days(&ds, 1, 1, 1).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (2, 2, 2));
    }

    #[test]
    fn long_view_rule() {
        let label = |w: f64, d: u32| derive_interest_label(&Interaction::new("u", "i", w, d));
        assert!(label(10.0, 10));
        assert!(!label(18.0, 30));
        assert!(label(18.5, 30));
        assert!(label(19.0, 20));
        assert!(!label(14.0, 15));
        assert!(label(18.0, 18));
    }
}
