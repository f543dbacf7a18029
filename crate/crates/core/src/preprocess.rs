//! Shot-event ingestion and the preprocessing pipeline.
//!
//! Raw records arrive in pitch coordinates (120 x 80 yards, attacking
//! towards `x = 120`). The pipeline corrects the post-width bias of some
//! seasons, projects obstructed shots forward to the goal line, converts to
//! goal-frame coordinates, drops close-range shots and mirrors left-footed
//! shots. Every record either becomes a [`CanonicalShot`] or gets a line in
//! the rejection log.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GoalFrame, GoalPoint};

/// Seasons whose end coordinates were recorded with inflated posts.
pub const INFLATED_POST_SEASONS: [&str; 4] =
    ["MLS 2018", "Ligue 2 2018-19", "2. Bundesliga 2018-19", "Eredivisie 2018-19"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    Saved,
    Goal,
    OffTarget,
    Blocked,
    Post,
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match normalize_label(s).as_str() {
            "saved" => Ok(Outcome::Saved),
            "goal" => Ok(Outcome::Goal),
            "offtarget" => Ok(Outcome::OffTarget),
            "blocked" => Ok(Outcome::Blocked),
            "post" => Ok(Outcome::Post),
            _ => Err(format!("unknown outcome {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BodyPart {
    RightFoot,
    LeftFoot,
    Header,
    Other,
}

impl FromStr for BodyPart {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match normalize_label(s).as_str() {
            "rightfoot" => Ok(BodyPart::RightFoot),
            "leftfoot" => Ok(BodyPart::LeftFoot),
            "header" | "head" => Ok(BodyPart::Header),
            "other" => Ok(BodyPart::Other),
            _ => Err(format!("unknown body part {s:?}")),
        }
    }
}

fn normalize_label(s: &str) -> String {
    s.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect()
}

/// Within-season split used by the stability analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Half {
    First,
    Second,
}

impl fmt::Display for Half {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Half::First => "First",
            Half::Second => "Second",
        })
    }
}

impl FromStr for Half {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match normalize_label(s).as_str() {
            "first" | "1" => Ok(Half::First),
            "second" | "2" => Ok(Half::Second),
            _ => Err(format!("unknown half {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PitchPoint {
    pub x: f64,
    pub y: f64,
}

/// One shot event as delivered by the data provider.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotRecord {
    pub player_id: String,
    pub season_id: String,
    pub timestamp: Option<f64>,
    pub outcome: Outcome,
    pub start: PitchPoint,
    pub end: PitchPoint,
    pub end_z: f64,
    pub body_part: BodyPart,
    pub xg: f64,
    pub postxg_ext: f64,
}

/// A shot after preprocessing, in goal-frame coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalShot {
    pub player_id: String,
    pub season_id: String,
    pub half: Half,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<f64>,
    pub body_part: BodyPart,
    /// Whether `end_point.y` was mirrored because the shot was left-footed.
    #[serde(default)]
    pub reflected: bool,
    pub end_point: GoalPoint,
    pub outcome: Outcome,
    pub is_goal: bool,
    pub xg: f64,
    pub postxg_ext: f64,
    pub distance: f64,
}

impl CanonicalShot {
    /// Rebuilds a pitch-coordinate record that the pipeline maps back onto
    /// this shot: the end point sits on the goal line (so no projection
    /// happens) and the start point sits `distance` yards straight out.
    pub fn to_record(&self, frame: &GoalFrame) -> ShotRecord {
        let y = if self.reflected { -self.end_point.y } else { self.end_point.y };
        ShotRecord {
            player_id: self.player_id.clone(),
            season_id: self.season_id.clone(),
            timestamp: self.timestamp,
            outcome: self.outcome,
            start: PitchPoint { x: frame.goal_line_x - self.distance, y: frame.y_center },
            end: PitchPoint { x: frame.goal_line_x, y: y + frame.y_center },
            end_z: self.end_point.z,
            body_part: self.body_part,
            xg: self.xg,
            postxg_ext: self.postxg_ext,
        }
    }
}

/// Piecewise-linear undo of the post-width inflation around each post.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostCorrection {
    pub inflated_half_width: f64,
    pub true_half_width: f64,
    /// Distance from a post center beyond which coordinates are untouched.
    pub limit: f64,
}

impl Default for PostCorrection {
    fn default() -> Self {
        PostCorrection { inflated_half_width: 0.30, true_half_width: 0.12, limit: 1.0 }
    }
}

impl PostCorrection {
    pub fn validate(&self, frame: &GoalFrame) -> Result<()> {
        let PostCorrection { inflated_half_width: inflated, true_half_width: real, limit } = *self;
        if !(real > 0.0 && inflated >= real && limit > inflated && limit < frame.half_width()) {
            return Err(Error::InvalidParameter(format!(
                "post correction needs 0 < true ({real}) <= inflated ({inflated}) < limit ({limit}) < half goal width"
            )));
        }
        Ok(())
    }

    /// Remaps a pitch `y`. Each post center is a fixed point; offsets up to
    /// `inflated_half_width` shrink onto `true_half_width`, the band out to
    /// `limit` stretches to stay continuous, and everything else is identity.
    pub fn apply(&self, end_y: f64, frame: &GoalFrame) -> f64 {
        let left = frame.y_center - frame.half_width();
        let right = frame.y_center + frame.half_width();
        let post = if (end_y - left).abs() <= (end_y - right).abs() { left } else { right };
        let offset = end_y - post;
        let d = offset.abs();
        if d >= self.limit || self.inflated_half_width == self.true_half_width {
            return end_y;
        }
        let mapped = if d <= self.inflated_half_width {
            d * self.true_half_width / self.inflated_half_width
        } else {
            self.true_half_width
                + (d - self.inflated_half_width) * (self.limit - self.true_half_width)
                    / (self.limit - self.inflated_half_width)
        };
        post + mapped.copysign(offset)
    }
}

pub fn correct_post_bias(end_y: f64, correction: &PostCorrection, frame: &GoalFrame) -> f64 {
    correction.apply(end_y, frame)
}

/// `y` where the line through `start` and `end` reaches `goal_line_x`.
pub fn project_to_goal_line(start: PitchPoint, end: PitchPoint, goal_line_x: f64) -> Result<f64> {
    if end.x == goal_line_x {
        return Ok(end.y);
    }
    let dx = end.x - start.x;
    if dx == 0.0 {
        return Err(Error::DegenerateTrajectory("zero x displacement".into()));
    }
    let between = (start.x < end.x && end.x < goal_line_x) || (goal_line_x < end.x && end.x < start.x);
    if !between {
        return Err(Error::DegenerateTrajectory(format!(
            "end x {} is not between start x {} and the goal line {goal_line_x}",
            end.x, start.x
        )));
    }
    let slope = (end.y - start.y) / dx;
    Ok(start.y + slope * (goal_line_x - start.x))
}

pub fn reflect_left_footed(p: GoalPoint, body_part: BodyPart) -> GoalPoint {
    match body_part {
        BodyPart::LeftFoot => p.mirrored(),
        _ => p,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub min_distance_yd: f64,
    pub reflect_left_foot: bool,
    pub post_correction_seasons: Vec<String>,
    pub inflated_half_width_yd: f64,
    pub true_half_width_yd: f64,
    pub correction_limit_yd: f64,
    pub frame: GoalFrame,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let c = PostCorrection::default();
        PipelineConfig {
            min_distance_yd: 6.0,
            reflect_left_foot: true,
            post_correction_seasons: INFLATED_POST_SEASONS.iter().map(|s| s.to_string()).collect(),
            inflated_half_width_yd: c.inflated_half_width,
            true_half_width_yd: c.true_half_width,
            correction_limit_yd: c.limit,
            frame: GoalFrame::default(),
        }
    }
}

impl PipelineConfig {
    pub fn post_correction(&self) -> PostCorrection {
        PostCorrection {
            inflated_half_width: self.inflated_half_width_yd,
            true_half_width: self.true_half_width_yd,
            limit: self.correction_limit_yd,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        self.post_correction().validate(&self.frame)?;
        if !(self.min_distance_yd >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "min_distance_yd must be non-negative, got {}",
                self.min_distance_yd
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RejectReason {
    ParseError,
    InvalidValue,
    DegenerateTrajectory,
    MinDistance,
    BelowGround,
}

impl RejectReason {
    pub fn code(&self) -> &'static str {
        match self {
            RejectReason::ParseError => "parse_error",
            RejectReason::InvalidValue => "invalid_value",
            RejectReason::DegenerateTrajectory => "degenerate_trajectory",
            RejectReason::MinDistance => "min_distance",
            RejectReason::BelowGround => "below_ground",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    /// 1-based data row (header excluded).
    pub row_number: usize,
    pub reason: RejectReason,
    pub detail: String,
}

/// Kept shots that look wrong but are not errors (e.g. a goal outside the frame).
#[derive(Debug, Clone, PartialEq)]
pub struct Anomaly {
    pub row_number: usize,
    pub kind: &'static str,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedInput {
    pub records: Vec<(usize, ShotRecord)>,
    pub rejections: Vec<Rejection>,
}

#[derive(Debug, Clone, Default)]
pub struct PipelineOutput {
    pub shots: Vec<CanonicalShot>,
    pub rejections: Vec<Rejection>,
    pub anomalies: Vec<Anomaly>,
}

/// Runs the pipeline on in-memory records; row numbers are positions + 1.
pub fn run_pipeline(records: &[ShotRecord], config: &PipelineConfig) -> Result<PipelineOutput> {
    let parsed = ParsedInput {
        records: records.iter().cloned().enumerate().map(|(i, r)| (i + 1, r)).collect(),
        rejections: Vec::new(),
    };
    run_pipeline_parsed(&parsed, config)
}

/// Runs the pipeline and merges parse failures into the rejection log.
pub fn run_pipeline_parsed(input: &ParsedInput, config: &PipelineConfig) -> Result<PipelineOutput> {
    config.validate()?;
    let frame = &config.frame;
    let correction = config.post_correction();

    let mut kept: Vec<(usize, CanonicalShot)> = Vec::new();
    let mut rejections = input.rejections.clone();
    let mut anomalies = Vec::new();

    for (row, rec) in &input.records {
        match canonicalize(rec, config, &correction) {
            Ok(shot) => {
                if shot.is_goal && !frame.contains(shot.end_point) {
                    anomalies.push(Anomaly { row_number: *row, kind: "goal_off_frame" });
                }
                kept.push((*row, shot));
            }
            Err((reason, detail)) => rejections.push(Rejection { row_number: *row, reason, detail }),
        }
    }

    assign_halves(&mut kept);
    rejections.sort_by_key(|r| r.row_number);
    Ok(PipelineOutput { shots: kept.into_iter().map(|(_, s)| s).collect(), rejections, anomalies })
}

fn canonicalize(
    rec: &ShotRecord,
    config: &PipelineConfig,
    correction: &PostCorrection,
) -> Result<CanonicalShot, (RejectReason, String)> {
    let frame = &config.frame;
    let mut end = rec.end;
    if config.post_correction_seasons.iter().any(|s| s == &rec.season_id) {
        end.y = correction.apply(end.y, frame);
    }
    if matches!(rec.outcome, Outcome::Saved | Outcome::Blocked) {
        end.y = project_to_goal_line(rec.start, end, frame.goal_line_x)
            .map_err(|e| (RejectReason::DegenerateTrajectory, e.to_string()))?;
    }
    if rec.end_z < 0.0 {
        return Err((RejectReason::BelowGround, format!("end_z = {}", rec.end_z)));
    }
    let distance = (frame.goal_line_x - rec.start.x).hypot(frame.y_center - rec.start.y);
    if distance < config.min_distance_yd {
        return Err((
            RejectReason::MinDistance,
            format!("{distance:.3} yd < {} yd", config.min_distance_yd),
        ));
    }
    let raw = GoalPoint::new(end.y - frame.y_center, rec.end_z);
    let reflected = config.reflect_left_foot && rec.body_part == BodyPart::LeftFoot;
    let end_point = if reflected { reflect_left_footed(raw, rec.body_part) } else { raw };
    Ok(CanonicalShot {
        player_id: rec.player_id.clone(),
        season_id: rec.season_id.clone(),
        half: Half::First,
        timestamp: rec.timestamp,
        body_part: rec.body_part,
        reflected,
        end_point,
        outcome: rec.outcome,
        is_goal: rec.outcome == Outcome::Goal,
        xg: rec.xg,
        postxg_ext: rec.postxg_ext,
        distance,
    })
}

/// Splits each season at its median shot: by timestamp when every shot of
/// the season has one, otherwise by record order.
fn assign_halves(shots: &mut [(usize, CanonicalShot)]) {
    let mut by_season: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, (_, s)) in shots.iter().enumerate() {
        by_season.entry(s.season_id.as_str()).or_default().push(i);
    }
    let mut halves = vec![Half::First; shots.len()];
    for idx in by_season.into_values() {
        let mut order = idx.clone();
        if idx.iter().all(|&i| shots[i].1.timestamp.is_some()) {
            // sort_by is stable, so ties keep record order
            order.sort_by(|&a, &b| {
                shots[a].1.timestamp.unwrap().total_cmp(&shots[b].1.timestamp.unwrap())
            });
        }
        let first = order.len().div_ceil(2);
        for &i in &order[first..] {
            halves[i] = Half::Second;
        }
    }
    for ((_, s), h) in shots.iter_mut().zip(halves) {
        s.half = h;
    }
}

// ---------------------------------------------------------------------------
// File formats

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShotFormat {
    Csv,
    JsonLines,
}

impl ShotFormat {
    pub fn from_path(path: &Path) -> ShotFormat {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("csv") => ShotFormat::Csv,
            _ => ShotFormat::JsonLines,
        }
    }
}

/// Row schema of the raw input files.
#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct RawShotRow {
    #[serde(deserialize_with = "de_id")]
    pub player_id: String,
    #[serde(deserialize_with = "de_id")]
    pub season_id: String,
    #[serde(default)]
    pub timestamp: Option<f64>,
    pub outcome: String,
    pub start_x: f64,
    pub start_y: f64,
    pub end_x: f64,
    pub end_y: f64,
    pub end_z: f64,
    pub body_part: String,
    pub xg: f64,
    pub postxg: f64,
}

impl From<&ShotRecord> for RawShotRow {
    fn from(r: &ShotRecord) -> Self {
        RawShotRow {
            player_id: r.player_id.clone(),
            season_id: r.season_id.clone(),
            timestamp: r.timestamp,
            outcome: format!("{:?}", r.outcome),
            start_x: r.start.x,
            start_y: r.start.y,
            end_x: r.end.x,
            end_y: r.end.y,
            end_z: r.end_z,
            body_part: format!("{:?}", r.body_part),
            xg: r.xg,
            postxg: r.postxg_ext,
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum IdRepr {
    Int(i64),
    Float(f64),
    Str(String),
}

fn de_id<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    Ok(match IdRepr::deserialize(d)? {
        IdRepr::Int(i) => i.to_string(),
        IdRepr::Float(f) => f.to_string(),
        IdRepr::Str(s) => s,
    })
}

impl TryFrom<RawShotRow> for ShotRecord {
    type Error = String;

    fn try_from(r: RawShotRow) -> Result<Self, String> {
        let outcome = r.outcome.parse::<Outcome>()?;
        let body_part = r.body_part.parse::<BodyPart>()?;
        for (name, v) in [
            ("start_x", r.start_x),
            ("start_y", r.start_y),
            ("end_x", r.end_x),
            ("end_y", r.end_y),
            ("end_z", r.end_z),
        ] {
            if !v.is_finite() {
                return Err(format!("{name} is not finite"));
            }
        }
        for (name, v) in [("xg", r.xg), ("postxg", r.postxg)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} = {v} outside [0, 1]"));
            }
        }
        Ok(ShotRecord {
            player_id: r.player_id,
            season_id: r.season_id,
            timestamp: r.timestamp.filter(|t| t.is_finite()),
            outcome,
            start: PitchPoint { x: r.start_x, y: r.start_y },
            end: PitchPoint { x: r.end_x, y: r.end_y },
            end_z: r.end_z,
            body_part,
            xg: r.xg,
            postxg_ext: r.postxg,
        })
    }
}

fn push_row(out: &mut ParsedInput, row: usize, parsed: Result<RawShotRow, String>) {
    match parsed {
        Ok(raw) => match ShotRecord::try_from(raw) {
            Ok(rec) => out.records.push((row, rec)),
            Err(detail) => out.rejections.push(Rejection {
                row_number: row,
                reason: RejectReason::InvalidValue,
                detail,
            }),
        },
        Err(detail) => {
            out.rejections.push(Rejection { row_number: row, reason: RejectReason::ParseError, detail })
        }
    }
}

pub fn parse_csv<R: std::io::Read>(reader: R) -> Result<ParsedInput, csv::Error> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut out = ParsedInput::default();
    for (i, rec) in rdr.records().enumerate() {
        let parsed = rec
            .map_err(|e| e.to_string())
            .and_then(|r| r.deserialize::<RawShotRow>(Some(&headers)).map_err(|e| e.to_string()));
        push_row(&mut out, i + 1, parsed);
    }
    Ok(out)
}

pub fn parse_json_lines<R: BufRead>(reader: R) -> std::io::Result<ParsedInput> {
    let mut out = ParsedInput::default();
    let mut row = 0;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        row += 1;
        push_row(&mut out, row, serde_json::from_str::<RawShotRow>(&line).map_err(|e| e.to_string()));
    }
    Ok(out)
}

/// Reads raw shot records; the format follows the file extension.
pub fn read_records(path: &Path) -> Result<ParsedInput> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match ShotFormat::from_path(path) {
        ShotFormat::Csv => parse_csv(file).map_err(|e| Error::format(path, e)),
        ShotFormat::JsonLines => parse_json_lines(BufReader::new(file)).map_err(|e| Error::io(path, e)),
    }
}

pub fn write_records_csv(path: &Path, records: &[ShotRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    for r in records {
        w.serialize(RawShotRow::from(r)).map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_shots(path: &Path, shots: &[CanonicalShot]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for s in shots {
        serde_json::to_writer(&mut w, s).map_err(|e| Error::format(path, e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_shots(path: &Path) -> Result<Vec<CanonicalShot>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut shots = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let shot = serde_json::from_str(&line)
            .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
        shots.push(shot);
    }
    Ok(shots)
}

pub fn write_rejections(path: &Path, rejections: &[Rejection]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    w.write_record(["row_number", "reason"]).map_err(|e| Error::format(path, e))?;
    for r in rejections {
        w.write_record([r.row_number.to_string().as_str(), r.reason.code()])
            .map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(outcome: Outcome, start: (f64, f64), end: (f64, f64, f64), body: BodyPart) -> ShotRecord {
        ShotRecord {
            player_id: "p1".into(),
            season_id: "s1".into(),
            timestamp: None,
            outcome,
            start: PitchPoint { x: start.0, y: start.1 },
            end: PitchPoint { x: end.0, y: end.1 },
            end_z: end.2,
            body_part: body,
            xg: 0.1,
            postxg_ext: 0.2,
        }
    }

    #[test]
    fn post_correction_identity_when_widths_match() {
        let frame = GoalFrame::default();
        let c = PostCorrection { inflated_half_width: 0.2, true_half_width: 0.2, limit: 1.0 };
        for i in 0..=800 {
            let y = 30.0 + i as f64 * 0.025;
            assert!((c.apply(y, &frame) - y).abs() < 1e-12, "y = {y}");
        }
    }

    #[test]
    fn post_centers_are_fixed_points() {
        let frame = GoalFrame::default();
        let c = PostCorrection::default();
        assert_eq!(c.apply(36.0, &frame), 36.0);
        assert_eq!(c.apply(44.0, &frame), 44.0);
    }

    #[test]
    fn inflated_edge_maps_to_true_edge() {
        let frame = GoalFrame::default();
        let c = PostCorrection::default();
        assert!((c.apply(44.30, &frame) - 44.12).abs() < 1e-12);
        assert!((c.apply(36.0 - 0.30, &frame) - (36.0 - 0.12)).abs() < 1e-12);
        // continuous at the limit, identity beyond
        assert!((c.apply(45.0, &frame) - 45.0).abs() < 1e-12);
        assert_eq!(c.apply(40.0, &frame), 40.0);
        assert_eq!(c.apply(50.0, &frame), 50.0);
    }

    #[test]
    fn post_correction_rejects_bad_config() {
        let frame = GoalFrame::default();
        let bad = PostCorrection { inflated_half_width: 0.1, true_half_width: 0.2, limit: 1.0 };
        assert!(bad.validate(&frame).is_err());
        let bad = PostCorrection { inflated_half_width: 0.3, true_half_width: 0.1, limit: 0.3 };
        assert!(bad.validate(&frame).is_err());
    }

    proptest! {
        #[test]
        fn post_correction_is_monotone(a in 30.0f64..50.0, b in 30.0f64..50.0) {
            let frame = GoalFrame::default();
            let c = PostCorrection::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(c.apply(lo, &frame) <= c.apply(hi, &frame));
        }

        #[test]
        fn reflection_is_an_involution(y in -20.0f64..20.0, z in 0.0f64..5.0) {
            let p = GoalPoint::new(y, z);
            for body in [BodyPart::LeftFoot, BodyPart::RightFoot, BodyPart::Header, BodyPart::Other] {
                prop_assert_eq!(reflect_left_footed(reflect_left_footed(p, body), body), p);
            }
        }
    }

    #[test]
    fn projection_examples() {
        let p = |sx, sy, ex, ey| project_to_goal_line(PitchPoint { x: sx, y: sy }, PitchPoint { x: ex, y: ey }, 120.0);
        assert_eq!(p(100.0, 40.0, 110.0, 42.0).unwrap(), 44.0);
        assert_eq!(p(105.0, 30.0, 120.0, 37.5).unwrap(), 37.5);
        assert!((p(102.0, 38.0, 111.0, 39.5).unwrap() - 41.0).abs() < 1e-12);
        assert!(matches!(p(110.0, 40.0, 110.0, 42.0), Err(Error::DegenerateTrajectory(_))));
        assert!(matches!(p(110.0, 40.0, 100.0, 42.0), Err(Error::DegenerateTrajectory(_))));
    }

    #[test]
    fn reflection_examples() {
        let p = GoalPoint::new(1.5, 1.0);
        assert_eq!(reflect_left_footed(p, BodyPart::LeftFoot), GoalPoint::new(-1.5, 1.0));
        assert_eq!(reflect_left_footed(p, BodyPart::RightFoot), p);
        let axis = GoalPoint::new(0.0, 0.5);
        assert_eq!(reflect_left_footed(axis, BodyPart::LeftFoot).y, 0.0);
    }

    #[test]
    fn empty_input() {
        let out = run_pipeline(&[], &PipelineConfig::default()).unwrap();
        assert!(out.shots.is_empty() && out.rejections.is_empty());
    }

    #[test]
    fn distance_filter_boundary() {
        let cfg = PipelineConfig::default();
        let close = rec(Outcome::Goal, (114.1, 40.0), (120.0, 41.0, 1.0), BodyPart::RightFoot);
        let ok = rec(Outcome::Goal, (114.0, 40.0), (120.0, 41.0, 1.0), BodyPart::RightFoot);
        let out = run_pipeline(&[close, ok], &cfg).unwrap();
        assert_eq!(out.shots.len(), 1);
        assert_eq!(out.rejections.len(), 1);
        assert_eq!(out.rejections[0].row_number, 1);
        assert_eq!(out.rejections[0].reason.code(), "min_distance");
    }

    #[test]
    fn saved_shot_projected_and_reflection_only_flips_sign() {
        let saved = rec(Outcome::Saved, (100.0, 40.0), (110.0, 42.0, 0.8), BodyPart::LeftFoot);
        let on = run_pipeline(std::slice::from_ref(&saved), &PipelineConfig::default()).unwrap();
        let off = run_pipeline(
            std::slice::from_ref(&saved),
            &PipelineConfig { reflect_left_foot: false, ..Default::default() },
        )
        .unwrap();
        let (a, b) = (on.shots[0].end_point, off.shots[0].end_point);
        assert_eq!(b.y, 4.0);
        assert_eq!(a.y, -4.0);
        assert_eq!(a.z, b.z);
        assert!(on.shots[0].reflected && !off.shots[0].reflected);
    }

    #[test]
    fn correction_only_for_listed_seasons() {
        let mut r = rec(Outcome::OffTarget, (100.0, 40.0), (120.0, 44.30, 1.0), BodyPart::RightFoot);
        let cfg = PipelineConfig { post_correction_seasons: vec!["s1".into()], ..Default::default() };
        let out = run_pipeline(std::slice::from_ref(&r), &cfg).unwrap();
        assert!((out.shots[0].end_point.y - 4.12).abs() < 1e-12);
        r.season_id = "other".into();
        let out = run_pipeline(&[r], &cfg).unwrap();
        assert!((out.shots[0].end_point.y - 4.30).abs() < 1e-12);
    }

    #[test]
    fn degenerate_trajectory_is_logged() {
        let r = rec(Outcome::Blocked, (100.0, 40.0), (100.0, 42.0, 0.5), BodyPart::RightFoot);
        let out = run_pipeline(&[r], &PipelineConfig::default()).unwrap();
        assert!(out.shots.is_empty());
        assert_eq!(out.rejections[0].reason, RejectReason::DegenerateTrajectory);
    }

    #[test]
    fn off_frame_goal_is_an_anomaly_not_a_rejection() {
        let r = rec(Outcome::Goal, (100.0, 40.0), (120.0, 45.0, 1.0), BodyPart::RightFoot);
        let out = run_pipeline(&[r], &PipelineConfig::default()).unwrap();
        assert_eq!(out.shots.len(), 1);
        assert_eq!(out.anomalies.len(), 1);
    }

    #[test]
    fn halves_split_by_timestamp_then_order() {
        let mut records = Vec::new();
        for (i, t) in [5.0, 1.0, 3.0, 2.0, 4.0].into_iter().enumerate() {
            let mut r = rec(Outcome::OffTarget, (100.0, 40.0), (120.0, 40.0 + i as f64, 1.0), BodyPart::Header);
            r.timestamp = Some(t);
            records.push(r);
        }
        let out = run_pipeline(&records, &PipelineConfig::default()).unwrap();
        let halves: Vec<Half> = out.shots.iter().map(|s| s.half).collect();
        use Half::*;
        assert_eq!(halves, vec![Second, First, First, First, Second]);

        for r in &mut records {
            r.timestamp = None;
        }
        let out = run_pipeline(&records, &PipelineConfig::default()).unwrap();
        let halves: Vec<Half> = out.shots.iter().map(|s| s.half).collect();
        assert_eq!(halves, vec![First, First, First, Second, Second]);
    }

    #[test]
    fn pipeline_is_idempotent_on_its_output() {
        let records: Vec<ShotRecord> = (0..40)
            .map(|i| {
                let body = [BodyPart::LeftFoot, BodyPart::RightFoot, BodyPart::Header][i % 3];
                let outcome = [Outcome::Saved, Outcome::Goal, Outcome::OffTarget, Outcome::Blocked][i % 4];
                let mut r = rec(outcome, (95.0 + i as f64 * 0.3, 30.0 + i as f64 * 0.5), (114.0, 36.0 + i as f64 * 0.2, 0.1 * i as f64), body);
                r.timestamp = Some((i * 7 % 11) as f64);
                r
            })
            .collect();
        let cfg = PipelineConfig { post_correction_seasons: vec!["s1".into()], ..Default::default() };
        let once = run_pipeline(&records, &cfg).unwrap();
        let frame = cfg.frame;
        let back: Vec<ShotRecord> = once.shots.iter().map(|s| s.to_record(&frame)).collect();
        let cfg2 = PipelineConfig { post_correction_seasons: vec![], ..cfg.clone() };
        let twice = run_pipeline(&back, &cfg2).unwrap();
        assert!(twice.rejections.is_empty());
        assert_eq!(once.shots.len(), twice.shots.len());
        for (a, b) in once.shots.iter().zip(&twice.shots) {
            assert!((a.end_point.y - b.end_point.y).abs() < 1e-12);
            assert_eq!(a.end_point.z, b.end_point.z);
            assert!((a.distance - b.distance).abs() < 1e-12);
            assert_eq!((a.half, a.reflected, a.is_goal), (b.half, b.reflected, b.is_goal));
        }
    }

    #[test]
    fn csv_with_malformed_row() {
        let text = "player_id,season_id,timestamp,outcome,start_x,start_y,end_x,end_y,end_z,body_part,xg,postxg\n\
                    1,2018,,Goal,100,40,120,41,1.0,Right Foot,0.1,0.5\n\
                    1,2018,3.5,Off Target,100,40,120,47,1.0,Left Foot,0.1,0\n\
                    2,2018,,Saved,100,40,oops,41,1.0,Head,0.1,0.3\n\
                    2,2018,,Blocked,100,40,110,41,0.4,Other,0.1,0.0\n\
                    3,2018,,Goal,100,40,120,41,1.0,Right Foot,1.5,0.5\n";
        let parsed = parse_csv(text.as_bytes()).unwrap();
        assert_eq!(parsed.records.len(), 3);
        assert_eq!(parsed.rejections.len(), 2);
        assert_eq!(parsed.rejections[0].row_number, 3);
        assert_eq!(parsed.rejections[0].reason, RejectReason::ParseError);
        assert_eq!(parsed.rejections[1].reason, RejectReason::InvalidValue);
        assert_eq!(parsed.records[1].1.timestamp, Some(3.5));
        assert_eq!(parsed.records[1].1.outcome, Outcome::OffTarget);
        let out = run_pipeline_parsed(&parsed, &PipelineConfig::default()).unwrap();
        assert_eq!(out.shots.len() + out.rejections.len(), 5);
    }

    #[test]
    fn json_lines_accepts_numeric_ids() {
        let text = r#"{"player_id": 7, "season_id": "MLS 2019", "outcome": "Goal", "start_x": 100, "start_y": 40, "end_x": 120, "end_y": 41, "end_z": 1.0, "body_part": "Right Foot", "xg": 0.1, "postxg": 0.5}

{"player_id": 8, "season_id": "MLS 2019", "outcome": "Goal"}
"#;
        let parsed = parse_json_lines(text.as_bytes()).unwrap();
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.records[0].1.player_id, "7");
        assert_eq!(parsed.rejections.len(), 1);
        assert_eq!(parsed.rejections[0].row_number, 2);
    }
}
