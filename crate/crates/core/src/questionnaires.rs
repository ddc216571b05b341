//! Data-driven questionnaire scoring (SSQ, SUS, PQ, face validity).

use crate::analysis::{mean_sd, Stats};
use crate::error::QuestionnaireError;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Item {
    pub id: String,
    pub prompt: String,
    pub min: i64,
    pub max: i64,
    #[serde(default)]
    pub reverse: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    Sum,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subscale {
    pub name: String,
    pub items: Vec<String>,
    pub weight: Option<f64>,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TotalRule {
    /// Raw subscale sums added together (items count once per subscale).
    SumSubscales,
    /// Sum of item values after reversal.
    SumItems,
    /// Sum of (value after reversal - item minimum).
    SumOffsets,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Total {
    pub rule: TotalRule,
    pub multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    /// Exclusive upper bound; the last band has none.
    pub below: Option<f64>,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentDefinition {
    pub id: String,
    pub name: String,
    pub items: Vec<Item>,
    pub subscales: Vec<Subscale>,
    pub total: Total,
    #[serde(default)]
    pub bands: Vec<Band>,
}

pub const INSTRUMENT_IDS: [&str; 4] = ["ssq", "sus", "pq", "face_validity"];

fn expected_scale(id: &str) -> Option<(i64, i64)> {
    match id {
        "ssq" => Some((0, 3)),
        "sus" => Some((1, 5)),
        "pq" => Some((1, 7)),
        "face_validity" => Some((1, 5)),
        _ => None,
    }
}

/// Parse and validate an instrument document.
pub fn load_instrument(document: &str) -> Result<InstrumentDefinition, QuestionnaireError> {
    let def: InstrumentDefinition =
        serde_json::from_str(document).map_err(|e| QuestionnaireError::Schema(e.to_string()))?;
    validate_instrument(&def)?;
    Ok(def)
}

pub fn validate_instrument(def: &InstrumentDefinition) -> Result<(), QuestionnaireError> {
    let schema = |m: String| Err(QuestionnaireError::Schema(m));
    if def.items.is_empty() {
        return schema(format!("{} has no items", def.id));
    }
    let mut ids = BTreeSet::new();
    for it in &def.items {
        if !ids.insert(it.id.as_str()) {
            return schema(format!("duplicate item {}", it.id));
        }
        if it.min >= it.max {
            return schema(format!("item {} has empty scale {}..{}", it.id, it.min, it.max));
        }
        if let Some((lo, hi)) = expected_scale(&def.id) {
            if (it.min, it.max) != (lo, hi) {
                return schema(format!("item {} scale {}..{} differs from {lo}..{hi}", it.id, it.min, it.max));
            }
        }
    }
    for s in &def.subscales {
        let w = s.weight.ok_or_else(|| QuestionnaireError::MissingWeight(s.name.clone()))?;
        if !w.is_finite() || w <= 0.0 {
            return schema(format!("subscale {} weight {w}", s.name));
        }
        if s.items.is_empty() {
            return schema(format!("subscale {} is empty", s.name));
        }
        if let Some(m) = s.items.iter().find(|m| !ids.contains(m.as_str())) {
            return schema(format!("subscale {} references unknown item {m}", s.name));
        }
    }
    if !def.total.multiplier.is_finite() || def.total.multiplier <= 0.0 {
        return schema("total multiplier must be positive".into());
    }
    if def.total.rule == TotalRule::SumSubscales && def.subscales.is_empty() {
        return schema("subscale total without subscales".into());
    }
    for w in def.bands.windows(2) {
        match (w[0].below, w[1].below) {
            (Some(a), Some(b)) if a < b => {}
            (Some(_), None) => {}
            _ => return schema("bands must have increasing bounds with only the last unbounded".into()),
        }
    }
    Ok(())
}

/// One of the instruments shipped with the crate.
pub fn bundled_instrument(id: &str) -> Result<InstrumentDefinition, QuestionnaireError> {
    let doc = match id {
        "ssq" => include_str!("../instruments/ssq.json"),
        "sus" => include_str!("../instruments/sus.json"),
        "pq" => include_str!("../instruments/pq.json"),
        "face_validity" => include_str!("../instruments/face_validity.json"),
        _ => return Err(QuestionnaireError::UnknownInstrument(id.to_string())),
    };
    load_instrument(doc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSet {
    pub participant_id: String,
    pub instrument: String,
    pub answers: BTreeMap<String, i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub participant_id: String,
    pub instrument: String,
    /// Weighted subscale scores (sum instruments) or means (mean instruments).
    pub subscales: BTreeMap<String, f64>,
    /// Item values after reversal.
    pub items: BTreeMap<String, f64>,
    pub total: Option<f64>,
    pub band: Option<String>,
}

impl InstrumentDefinition {
    /// Theoretical range of the total, if the instrument defines one.
    pub fn total_range(&self) -> Option<(f64, f64)> {
        let m = self.total.multiplier;
        match self.total.rule {
            TotalRule::None => None,
            TotalRule::SumItems => {
                Some((self.items.iter().map(|i| i.min as f64).sum::<f64>() * m, self.items.iter().map(|i| i.max as f64).sum::<f64>() * m))
            }
            TotalRule::SumOffsets => Some((0.0, self.items.iter().map(|i| (i.max - i.min) as f64).sum::<f64>() * m)),
            TotalRule::SumSubscales => {
                let by_id: BTreeMap<&str, &Item> = self.items.iter().map(|i| (i.id.as_str(), i)).collect();
                let (lo, hi) = self.subscales.iter().flat_map(|s| s.items.iter()).fold((0.0, 0.0), |(lo, hi), id| {
                    let it = by_id[id.as_str()];
                    (lo + it.min as f64, hi + it.max as f64)
                });
                Some((lo * m, hi * m))
            }
        }
    }

    pub fn band_for(&self, total: f64) -> Option<String> {
        self.bands.iter().find(|b| b.below.map_or(true, |u| total < u)).map(|b| b.label.clone())
    }
}

/// Score a complete response set.
pub fn score(def: &InstrumentDefinition, response: &ResponseSet) -> Result<ScoreReport, QuestionnaireError> {
    if response.instrument != def.id {
        return Err(QuestionnaireError::MixedInstruments(def.id.clone(), response.instrument.clone()));
    }
    if let Some(k) = response.answers.keys().find(|k| !def.items.iter().any(|i| &i.id == *k)) {
        return Err(QuestionnaireError::UnknownItem(k.clone()));
    }
    let mut items = BTreeMap::new();
    for it in &def.items {
        let v = *response.answers.get(&it.id).ok_or_else(|| QuestionnaireError::MissingItem(it.id.clone()))?;
        if v < it.min || v > it.max {
            return Err(QuestionnaireError::OutOfRange { item: it.id.clone(), value: v, min: it.min, max: it.max });
        }
        let v = if it.reverse { it.min + it.max - v } else { v };
        items.insert(it.id.clone(), v as f64);
    }
    let mut subscales = BTreeMap::new();
    let mut raw_sub_sum = 0.0;
    for s in &def.subscales {
        let raw: f64 = s.items.iter().map(|id| items[id]).sum();
        raw_sub_sum += raw;
        let w = s.weight.unwrap_or(1.0);
        let v = match s.aggregate {
            Aggregate::Sum => raw * w,
            Aggregate::Mean => raw / s.items.len() as f64 * w,
        };
        subscales.insert(s.name.clone(), v);
    }
    let m = def.total.multiplier;
    let total = match def.total.rule {
        TotalRule::SumSubscales => Some(raw_sub_sum * m),
        TotalRule::SumItems => Some(items.values().sum::<f64>() * m),
        TotalRule::SumOffsets => Some(def.items.iter().map(|it| items[&it.id] - it.min as f64).sum::<f64>() * m),
        TotalRule::None => None,
    };
    let band = total.and_then(|t| def.band_for(t));
    Ok(ScoreReport {
        participant_id: response.participant_id.clone(),
        instrument: def.id.clone(),
        subscales,
        items,
        total,
        band,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortSummary {
    pub instrument: String,
    /// Rows of `measure, mean, sd`.
    pub rows: Vec<(String, Stats)>,
}

impl CohortSummary {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("measure,mean,sd\n");
        for (m, st) in &self.rows {
            s.push_str(&format!("{m},{:.2},{:.2}\n", st.mean, st.sd));
        }
        s
    }
}

/// Mean and sample SD of totals, subscales and (for instruments without a
/// total) items.
pub fn summarize_cohort(reports: &[ScoreReport]) -> Result<CohortSummary, QuestionnaireError> {
    let first = reports.first().ok_or(QuestionnaireError::Empty)?;
    if let Some(r) = reports.iter().find(|r| r.instrument != first.instrument) {
        return Err(QuestionnaireError::MixedInstruments(first.instrument.clone(), r.instrument.clone()));
    }
    let mut rows = Vec::new();
    if first.total.is_some() {
        let v: Vec<f64> = reports.iter().filter_map(|r| r.total).collect();
        rows.push(("total".to_string(), mean_sd(&v)));
    }
    for name in first.subscales.keys() {
        let v: Vec<f64> = reports.iter().filter_map(|r| r.subscales.get(name).copied()).collect();
        rows.push((name.clone(), mean_sd(&v)));
    }
    if first.total.is_none() {
        for id in first.items.keys() {
            let v: Vec<f64> = reports.iter().filter_map(|r| r.items.get(id).copied()).collect();
            rows.push((id.clone(), mean_sd(&v)));
        }
    }
    Ok(CohortSummary { instrument: first.instrument.clone(), rows })
}

pub const RESPONSES_HEADER: [&str; 4] = ["participant_id", "instrument", "item_id", "value"];

/// Read long-format responses, grouped by participant and instrument in
/// order of first appearance.
pub fn read_responses<R: Read>(reader: R) -> Result<Vec<ResponseSet>, QuestionnaireError> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != RESPONSES_HEADER {
        return Err(QuestionnaireError::Schema(format!("responses header {}", header.join(","))));
    }
    let mut out: Vec<ResponseSet> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let (pid, inst, item, raw) = (&rec[0], &rec[1], &rec[2], rec[3].trim());
        let value: i64 = raw
            .parse()
            .map_err(|_| QuestionnaireError::Schema(format!("row {}: value {raw:?} is not an integer", i + 1)))?;
        let pos = out.iter().position(|s| s.participant_id == pid && s.instrument == inst);
        let set = match pos {
            Some(p) => &mut out[p],
            None => {
                out.push(ResponseSet { participant_id: pid.into(), instrument: inst.into(), answers: BTreeMap::new() });
                out.last_mut().expect("just pushed")
            }
        };
        if set.answers.insert(item.to_string(), value).is_some() {
            return Err(QuestionnaireError::Schema(format!("row {}: duplicate answer for {item}", i + 1)));
        }
    }
    Ok(out)
}

/// Per-participant report table.
pub fn reports_csv(reports: &[ScoreReport]) -> String {
    let names: Vec<String> = reports.first().map(|r| r.subscales.keys().cloned().collect()).unwrap_or_default();
    let mut s = format!("participant_id,instrument,total,band{}\n", names.iter().map(|n| format!(",{n}")).collect::<String>());
    for r in reports {
        s.push_str(&format!(
            "{},{},{},{}",
            r.participant_id,
            r.instrument,
            r.total.map(|t| format!("{t:.2}")).unwrap_or_default(),
            r.band.clone().unwrap_or_default()
        ));
        for n in &names {
            s.push_str(&format!(",{:.2}", r.subscales.get(n).copied().unwrap_or(0.0)));
        }
        s.push('\n');
    }
    s
}
