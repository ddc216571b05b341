//! Post-hoc analysis of telemetry logs: assignment splits, durations,
//! route-strategy classification, choice tallies, gaze heatmaps and speeds.

use crate::agents::nearest_exit;
use crate::building::{FloorId, PlacedPose, WalkableKind, ZonePurpose};
use crate::error::{AnalysisError, TelemetryError};
use crate::geometry::{point_in_ring, Vec2, Vec3};
use crate::sim::{World, EYE_HEIGHT_MAX_CM, EYE_HEIGHT_MIN_CM};
use crate::telemetry::{SessionLog, TelemetrySample};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::ops::Range;
use std::path::Path;

pub const DEFAULT_HEATMAP_CELL_CM: f64 = 25.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentSplit {
    pub assignment: u8,
    /// Sample index range within the log.
    pub samples: Range<usize>,
    pub start_ms: u64,
    pub end_ms: u64,
    /// False when the log ends before the assignment completes.
    pub complete: bool,
}

impl AssignmentSplit {
    pub fn slice<'a>(&self, log: &'a SessionLog) -> &'a [TelemetrySample] {
        &log.samples[self.samples.clone()]
    }

    pub fn duration_s(&self) -> f64 {
        (self.end_ms - self.start_ms) as f64 / 1000.0
    }
}

/// Split a log at assignment boundaries. Complete splits are followed by at
/// most one trailing incomplete split.
pub fn split_by_assignment(log: &SessionLog) -> Result<Vec<AssignmentSplit>, AnalysisError> {
    let mut starts: Vec<(u8, u64)> = Vec::new();
    let mut completes: Vec<(u8, u64)> = Vec::new();
    for e in &log.events {
        let id = || -> Result<u8, AnalysisError> {
            e.detail
                .parse()
                .map_err(|_| AnalysisError::UnmatchedEvents(format!("bad assignment id {:?}", e.detail)))
        };
        match e.event.as_str() {
            "assignment_start" => starts.push((id()?, e.t_ms)),
            "assignment_complete" => completes.push((id()?, e.t_ms)),
            _ => {}
        }
    }
    if completes.len() > starts.len() || completes.len() + 1 < starts.len() {
        return Err(AnalysisError::UnmatchedEvents(format!(
            "{} starts, {} completions",
            starts.len(),
            completes.len()
        )));
    }
    for (i, &(id, t)) in completes.iter().enumerate() {
        let (sid, st) = starts[i];
        if sid != id || t < st {
            return Err(AnalysisError::UnmatchedEvents(format!("completion of {id} does not match start of {sid}")));
        }
        if let Some(&(nid, nt)) = starts.get(i + 1) {
            if nt < t || nid <= id {
                return Err(AnalysisError::UnmatchedEvents(format!("assignment {nid} starts before {id} completes")));
            }
        }
    }
    let index_at = |t: u64| log.samples.partition_point(|s| s.t_ms < t);
    let mut out = Vec::new();
    for (i, &(id, st)) in starts.iter().enumerate() {
        let begin = if i == 0 { 0 } else { index_at(st) };
        let complete = completes.get(i).copied();
        let end = match starts.get(i + 1) {
            Some(&(_, nt)) => index_at(nt),
            None => log.samples.len(),
        };
        let end_ms = match complete {
            Some((_, t)) => t,
            None => log.samples.last().map_or(st, |s| s.t_ms),
        };
        out.push(AssignmentSplit { assignment: id, samples: begin..end, start_ms: st, end_ms, complete: complete.is_some() });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1); zero for a single value.
    pub sd: f64,
}

pub fn mean_sd(values: &[f64]) -> Stats {
    let n = values.len();
    if n == 0 {
        return Stats { n, mean: 0.0, sd: 0.0 };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Stats { n, mean, sd }
}

/// Durations in seconds of the complete splits, keyed by assignment id.
pub fn time_spent(splits: &[AssignmentSplit]) -> BTreeMap<u8, f64> {
    splits.iter().filter(|s| s.complete).map(|s| (s.assignment, s.duration_s())).collect()
}

/// Cohort mean and SD per assignment, plus the total (key 0) over logs that
/// completed every assignment they started.
pub fn cohort_time_stats(per_log: &[BTreeMap<u8, f64>]) -> BTreeMap<u8, Stats> {
    let mut by: BTreeMap<u8, Vec<f64>> = BTreeMap::new();
    for m in per_log {
        for (&k, &v) in m {
            by.entry(k).or_default().push(v);
        }
        if !m.is_empty() {
            by.entry(0).or_default().push(m.values().sum());
        }
    }
    by.into_iter().map(|(k, v)| (k, mean_sd(&v))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    CentralPoint,
    Direction,
    Floor,
    Mixed,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::CentralPoint => "central_point",
            Strategy::Direction => "direction",
            Strategy::Floor => "floor",
            Strategy::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrategyThresholds {
    pub central_detour: f64,
    pub direction_h_star: f64,
    pub floor_h_star: f64,
    pub central_switch_detour: f64,
    pub direction_switch_fraction: f64,
}

impl Default for StrategyThresholds {
    fn default() -> Self {
        StrategyThresholds {
            central_detour: 1.25,
            direction_h_star: 0.7,
            floor_h_star: 0.3,
            central_switch_detour: 1.1,
            direction_switch_fraction: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyEvidence {
    pub h_star: Option<f64>,
    pub detour_ratio: f64,
    pub visited_central: bool,
    pub switch_fraction: Option<f64>,
    pub switch_in_wide_intersection: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyLabel {
    pub label: Strategy,
    pub evidence: StrategyEvidence,
}

/// Floor a sample stands on (or is climbing from), derived from eye height.
pub fn sample_floor(world: &World, s: &TelemetrySample) -> Option<FloorId> {
    world.spec.floor_below_eye(s.pos.z)
}

fn sample_pose(world: &World, s: &TelemetrySample) -> Option<PlacedPose> {
    let f = sample_floor(world, s)?;
    Some(PlacedPose { floor: f, point: Vec3::with_xy(s.pos.xy(), world.floor_z(f)) })
}

fn arc_length(samples: &[TelemetrySample]) -> f64 {
    samples.windows(2).map(|w| w[0].pos.distance(w[1].pos)).sum()
}

fn axis_fraction(a: Vec2, b: Vec2, p: Vec2) -> f64 {
    let ax = b - a;
    let len2 = ax.dot(ax);
    if len2 < 1e-12 {
        return 0.0;
    }
    ((p - a).dot(ax) / len2).clamp(0.0, 1.0)
}

fn main_corridor(world: &World, floor: FloorId, p: Vec2) -> Option<String> {
    world.spec.floor(floor)?.walkable.iter().find_map(|w| {
        (w.kind == WalkableKind::MainCorridor && (point_in_ring(p, &w.polygon) || on_ring(p, &w.polygon)))
            .then(|| w.id.clone())
    })
}

fn on_ring(p: Vec2, ring: &[Vec2]) -> bool {
    (0..ring.len()).any(|i| crate::geometry::Segment::new(ring[i], ring[(i + 1) % ring.len()]).distance_to(p) < 1e-3)
}

fn in_zone(world: &World, purpose: ZonePurpose, floor: FloorId, p: Vec2) -> bool {
    world.spec.zones_with(purpose).any(|z| z.floor == floor && z.contains(p))
}

/// Label the route strategy of one assignment split.
pub fn classify_strategy(
    world: &World,
    samples: &[TelemetrySample],
    thresholds: &StrategyThresholds,
) -> Result<StrategyLabel, AnalysisError> {
    let (Some(first), Some(last)) = (samples.first(), samples.last()) else {
        return Err(AnalysisError::EmptySplit("empty".into()));
    };
    let a = sample_pose(world, first).ok_or_else(|| AnalysisError::EmptySplit("first sample".into()))?;
    let b = sample_pose(world, last).ok_or_else(|| AnalysisError::EmptySplit("last sample".into()))?;
    let shortest = world.mesh.shortest_path(&a, &b)?.length_cm;
    let arc = arc_length(samples);
    let detour_ratio = if shortest > 1e-9 { arc / shortest } else { 1.0 };
    let visited_central = samples.iter().any(|s| {
        sample_floor(world, s).is_some_and(|f| in_zone(world, ZonePurpose::CentralPoint, f, s.pos.xy()))
    });
    let mut ev = StrategyEvidence {
        h_star: None,
        detour_ratio,
        visited_central,
        switch_fraction: None,
        switch_in_wide_intersection: false,
    };
    let (pa, pb) = (first.pos.xy(), last.pos.xy());

    if a.floor != b.floor {
        let dz = last.pos.z - first.pos.z;
        let half = samples
            .iter()
            .find(|s| (s.pos.z - first.pos.z).abs() >= 0.5 * dz.abs())
            .unwrap_or(last);
        let h = axis_fraction(pa, pb, half.pos.xy());
        ev.h_star = Some(h);
        let label = if detour_ratio >= thresholds.central_detour && visited_central {
            Strategy::CentralPoint
        } else if h >= thresholds.direction_h_star {
            Strategy::Direction
        } else if h <= thresholds.floor_h_star {
            Strategy::Floor
        } else {
            Strategy::Mixed
        };
        return Ok(StrategyLabel { label, evidence: ev });
    }

    // Same floor: look for the first change of main corridor.
    let floor = a.floor;
    let start_corr = main_corridor(world, floor, pa);
    let goal_corr = main_corridor(world, floor, pb);
    let mut label = Strategy::Mixed;
    if start_corr.is_some() && goal_corr.is_some() && start_corr != goal_corr {
        let mut last_in_start = 0;
        for (i, s) in samples.iter().enumerate() {
            let c = main_corridor(world, floor, s.pos.xy());
            if c == start_corr {
                last_in_start = i;
            } else if c.is_some() {
                let frac = axis_fraction(pa, pb, s.pos.xy());
                let wide = samples[last_in_start..=i]
                    .iter()
                    .any(|t| in_zone(world, ZonePurpose::WideIntersection, floor, t.pos.xy()));
                ev.switch_fraction = Some(frac);
                ev.switch_in_wide_intersection = wide;
                label = if wide && detour_ratio >= thresholds.central_switch_detour {
                    Strategy::CentralPoint
                } else if frac <= thresholds.direction_switch_fraction {
                    Strategy::Direction
                } else {
                    Strategy::Mixed
                };
                break;
            }
        }
    }
    Ok(StrategyLabel { label, evidence: ev })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ChoiceTally {
    pub exits: BTreeMap<String, usize>,
    /// Splits in which each staircase was used.
    pub staircases: BTreeMap<String, usize>,
    pub nearest_exit_agreement: f64,
    pub completed: usize,
    pub excluded: usize,
}

/// Staircase labels used within a run of samples, in order of first use.
pub fn staircases_used(world: &World, samples: &[TelemetrySample]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for s in samples {
        if let Some(li) = world.mesh.ramp_at_eye(s.pos, EYE_HEIGHT_MIN_CM, EYE_HEIGHT_MAX_CM) {
            let label = &world.mesh.stair_links()[li].staircase;
            if !out.contains(label) {
                out.push(label.clone());
            }
        }
    }
    out
}

/// Pose at the start of the evacuation assignment.
pub fn evacuation_start(world: &World, log: &SessionLog) -> Option<PlacedPose> {
    let t = log.events.iter().find(|e| e.event == "assignment_start" && e.detail == "4")?.t_ms;
    let s = log.samples.iter().find(|s| s.t_ms >= t)?;
    sample_pose(world, s)
}

pub fn choice_tally(world: &World, logs: &[SessionLog]) -> ChoiceTally {
    let mut t = ChoiceTally::default();
    for e in &world.spec.exits {
        t.exits.insert(e.label.clone(), 0);
    }
    for s in &world.spec.staircases {
        t.staircases.insert(s.label.clone(), 0);
    }
    let mut agree = 0usize;
    for log in logs {
        if let Ok(splits) = split_by_assignment(log) {
            for sp in &splits {
                for label in staircases_used(world, sp.slice(log)) {
                    *t.staircases.entry(label).or_insert(0) += 1;
                }
            }
        }
        let Some(exit) = log.exit_reached() else {
            t.excluded += 1;
            continue;
        };
        t.completed += 1;
        *t.exits.entry(exit.to_string()).or_insert(0) += 1;
        let nearest = evacuation_start(world, log).and_then(|p| nearest_exit(world, &p).ok()).map(|(l, _)| l);
        if nearest.as_deref() == Some(exit) {
            agree += 1;
        }
    }
    t.nearest_exit_agreement = if t.completed == 0 { 0.0 } else { agree as f64 / t.completed as f64 };
    t
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatmapGrid {
    pub floor: FloorId,
    pub cell_cm: f64,
    pub origin: Vec2,
    pub cols: usize,
    pub rows: usize,
    /// Row-major counts, `rows` rows of `cols` cells.
    pub counts: Vec<Vec<u64>>,
}

impl HeatmapGrid {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

fn floor_bounds(world: &World, floor: FloorId) -> (Vec2, Vec2) {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    if let Some(f) = world.spec.floor(floor) {
        for p in f.walkable.iter().flat_map(|w| w.polygon.iter()) {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
    }
    (lo, hi)
}

/// Gaze hit counts per cell for samples standing on `floor`.
pub fn gaze_heatmap(world: &World, logs: &[SessionLog], floor: FloorId, cell_cm: f64) -> Result<HeatmapGrid, AnalysisError> {
    if !(10.0..=200.0).contains(&cell_cm) {
        return Err(AnalysisError::InvalidParameter(format!("cell size {cell_cm} outside [10, 200]")));
    }
    let (lo, hi) = floor_bounds(world, floor);
    let cols = ((hi.x - lo.x) / cell_cm).ceil().max(1.0) as usize;
    let rows = ((hi.y - lo.y) / cell_cm).ceil().max(1.0) as usize;
    let mut counts = vec![vec![0u64; cols]; rows];
    for s in logs.iter().flat_map(|l| l.samples.iter()) {
        let Some(g) = s.gaze else { continue };
        if sample_floor(world, s) != Some(floor) {
            continue;
        }
        let cx = (((g.x - lo.x) / cell_cm).floor().max(0.0) as usize).min(cols - 1);
        let cy = (((g.y - lo.y) / cell_cm).floor().max(0.0) as usize).min(rows - 1);
        counts[cy][cx] += 1;
    }
    Ok(HeatmapGrid { floor, cell_cm, origin: lo, cols, rows, counts })
}

/// Gaze target kind counts per assignment.
pub fn gaze_target_tally(logs: &[SessionLog]) -> BTreeMap<u8, BTreeMap<String, u64>> {
    let mut out: BTreeMap<u8, BTreeMap<String, u64>> = BTreeMap::new();
    for s in logs.iter().flat_map(|l| l.samples.iter()) {
        let kind = s.gaze_target.split(':').next().unwrap_or("none").to_string();
        *out.entry(s.assignment).or_default().entry(kind).or_insert(0) += 1;
    }
    out
}

pub const SPEED_BIN_CM_S: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedStats {
    pub mean: f64,
    pub max: f64,
    /// Counts per `SPEED_BIN_CM_S` wide bin starting at 0.
    pub histogram: Vec<u64>,
}

/// Horizontal speed between consecutive samples.
pub fn speed_stats(samples: &[TelemetrySample]) -> Option<SpeedStats> {
    if samples.len() < 2 {
        return None;
    }
    let speeds: Vec<f64> = samples
        .windows(2)
        .map(|w| w[0].pos.xy().distance(w[1].pos.xy()) / ((w[1].t_ms - w[0].t_ms) as f64 / 1000.0))
        .collect();
    let max = speeds.iter().copied().fold(0.0, f64::max);
    let mut histogram = vec![0u64; (max / SPEED_BIN_CM_S).floor() as usize + 1];
    for v in &speeds {
        histogram[(v / SPEED_BIN_CM_S).floor() as usize] += 1;
    }
    Some(SpeedStats { mean: speeds.iter().sum::<f64>() / speeds.len() as f64, max, histogram })
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> TelemetryError + '_ {
    move |source| TelemetryError::Io { path: path.to_path_buf(), source }
}

/// Write every analysis table for a set of logs into `out`.
pub fn write_analysis(world: &World, logs: &[SessionLog], out: &Path, cell_cm: f64) -> Result<(), TelemetryError> {
    fs::create_dir_all(out).map_err(io(out))?;
    let th = StrategyThresholds::default();

    let p = out.join("time_spent.csv");
    let mut w = csv::Writer::from_path(&p)?;
    w.write_record(["participant", "assignment", "start_ms", "end_ms", "duration_s", "complete"])?;
    let p2 = out.join("strategies.csv");
    let mut sw = csv::Writer::from_path(&p2)?;
    sw.write_record(["participant", "assignment", "label", "h_star", "detour_ratio", "visited_central", "switch_fraction"])?;
    for log in logs {
        let Ok(splits) = split_by_assignment(log) else { continue };
        for s in &splits {
            w.write_record([
                log.participant_id.clone(),
                s.assignment.to_string(),
                s.start_ms.to_string(),
                s.end_ms.to_string(),
                format!("{:.1}", s.duration_s()),
                s.complete.to_string(),
            ])?;
            if !s.complete {
                continue;
            }
            if let Ok(l) = classify_strategy(world, s.slice(log), &th) {
                let opt = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_default();
                sw.write_record([
                    log.participant_id.clone(),
                    s.assignment.to_string(),
                    l.label.as_str().to_string(),
                    opt(l.evidence.h_star),
                    format!("{:.4}", l.evidence.detour_ratio),
                    l.evidence.visited_central.to_string(),
                    opt(l.evidence.switch_fraction),
                ])?;
            }
        }
    }
    w.flush().map_err(io(&p))?;
    sw.flush().map_err(io(&p2))?;

    let tally = choice_tally(world, logs);
    let p = out.join("choices.csv");
    let mut w = csv::Writer::from_path(&p)?;
    w.write_record(["kind", "label", "count"])?;
    for (k, v) in &tally.exits {
        w.write_record(["exit", k, &v.to_string()])?;
    }
    for (k, v) in &tally.staircases {
        w.write_record(["staircase", k, &v.to_string()])?;
    }
    w.write_record(["nearest_exit_agreement", "", &format!("{:.4}", tally.nearest_exit_agreement)])?;
    w.write_record(["completed", "", &tally.completed.to_string()])?;
    w.write_record(["excluded", "", &tally.excluded.to_string()])?;
    w.flush().map_err(io(&p))?;

    for floor in world.spec.floor_ids() {
        let Ok(grid) = gaze_heatmap(world, logs, floor, cell_cm) else { continue };
        let p = out.join(format!("heatmap_floor{floor}.csv"));
        let mut f = std::io::BufWriter::new(fs::File::create(&p).map_err(io(&p))?);
        let mut body = format!(
            "origin_x_cm,origin_y_cm,cell_cm,cols,rows\n{},{},{},{},{}\n",
            grid.origin.x, grid.origin.y, grid.cell_cm, grid.cols, grid.rows
        );
        for row in &grid.counts {
            body.push_str(&row.iter().map(u64::to_string).collect::<Vec<_>>().join(","));
            body.push('\n');
        }
        f.write_all(body.as_bytes()).map_err(io(&p))?;
    }

    let p = out.join("gaze_targets.csv");
    let mut w = csv::Writer::from_path(&p)?;
    w.write_record(["assignment", "target_kind", "count"])?;
    for (a, m) in gaze_target_tally(logs) {
        for (k, v) in m {
            w.write_record([a.to_string(), k, v.to_string()])?;
        }
    }
    w.flush().map_err(io(&p))?;
    Ok(())
}
