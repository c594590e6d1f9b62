//! Feature engineering for the boosted-tree engine: sales lags, rolling
//! means of lags, calendar fields, event ids, prices and the categorical
//! identity columns, assembled into a long-format feature matrix.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CalendarTable, LongSales, PriceTable};

/// Missing-aware feature value. `None` is a first-class missing marker, not
/// a sentinel number; the boosted trees route it to a learned branch.
pub type FeatureValue = Option<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

/// One feature column. Categorical columns store dense ids as f64 and carry
/// the id-to-label dictionary in `levels`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub values: Vec<FeatureValue>,
    pub levels: Option<Vec<String>>,
}

/// Long-format feature matrix: one row per (series, day) with the target
/// and every engineered column. Row order is (wide series order) x
/// (ascending day); construction is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub series_names: Vec<String>,
    /// Per row, index into `series_names`.
    pub row_series: Vec<u32>,
    /// Per row, 1-based day index.
    pub days: Vec<u32>,
    pub target: Vec<f64>,
    pub columns: Vec<Column>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// One row's feature values in column order.
    pub fn row_features(&self, idx: usize) -> Vec<FeatureValue> {
        self.columns.iter().map(|c| c.values[idx]).collect()
    }
}

/// The engineered lag/rolling-mean columns, in matrix order.
/// `rmean_w_k` is the w-day trailing mean of `lag_k`.
pub const ENGINEERED: [&str; 6] = [
    "lag_7",
    "lag_28",
    "rmean_7_7",
    "rmean_28_7",
    "rmean_7_28",
    "rmean_28_28",
];

const LAG_WINDOWS: [(usize, usize); 4] = [(7, 7), (28, 7), (7, 28), (28, 28)];

/// Lagged copy of a series: entry t is the value at t - k, with the first
/// k entries missing.
pub fn make_lag(values: &[f64], k: usize) -> Result<Vec<FeatureValue>> {
    if k >= values.len() {
        return Err(Error::invalid(format!(
            "lag {} requires a series longer than {}",
            k,
            values.len()
        )));
    }
    Ok((0..values.len())
        .map(|t| if t >= k { Some(values[t - k]) } else { None })
        .collect())
}

/// Trailing-window mean ending at each position; missing wherever any of
/// the w window elements is missing.
pub fn rolling_mean(values: &[FeatureValue], w: usize) -> Vec<FeatureValue> {
    assert!(w >= 1, "window must be positive");
    (0..values.len())
        .map(|t| {
            if t + 1 < w {
                return None;
            }
            let mut sum = 0.0;
            for v in &values[t + 1 - w..=t] {
                sum += (*v)?;
            }
            Some(sum / w as f64)
        })
        .collect()
}

/// Calendar-derived fields for one date. Week numbering is ISO-8601; the
/// weekday is the ISO weekday (Monday = 1) when computed standalone, while
/// matrix construction takes the calendar file's own wday column instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CalendarFeatures {
    pub week: u32,
    pub quarter: u8,
    pub mday: u8,
    pub wday: u8,
}

pub fn calendar_features(date: NaiveDate) -> CalendarFeatures {
    CalendarFeatures {
        week: date.iso_week().week(),
        quarter: (date.month0() / 3 + 1) as u8,
        mday: date.day() as u8,
        wday: date.weekday().number_from_monday() as u8,
    }
}

/// First-appearance dictionaries for event names and types. Id 0 means "no
/// event"; real ids start at 1 in calendar-file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventDicts {
    pub names: Vec<String>,
    pub types: Vec<String>,
}

impl EventDicts {
    /// Scans the calendar once, assigning ids in first-appearance order.
    /// Only the first event slot feeds the features; the second slot is
    /// parsed upstream but unused here.
    pub fn from_calendar(calendar: &CalendarTable) -> Self {
        let mut names = vec![String::new()];
        let mut types = vec![String::new()];
        for row in &calendar.rows {
            if let Some(n) = &row.event_name_1 {
                if !names.iter().any(|x| x == n) {
                    names.push(n.clone());
                }
            }
            if let Some(t) = &row.event_type_1 {
                if !types.iter().any(|x| x == t) {
                    types.push(t.clone());
                }
            }
        }
        EventDicts { names, types }
    }

    /// (event_name id, event_type id) for a calendar row; (0, 0) when no
    /// event falls on that date.
    pub fn event_features(&self, row: &crate::ingest::CalendarRow) -> (u32, u32) {
        let name_id = row
            .event_name_1
            .as_ref()
            .and_then(|n| self.names.iter().position(|x| x == n))
            .unwrap_or(0) as u32;
        let type_id = row
            .event_type_1
            .as_ref()
            .and_then(|t| self.types.iter().position(|x| x == t))
            .unwrap_or(0) as u32;
        (name_id, type_id)
    }
}

/// The six engineered lag/rolling values at 0-based position `t` of a raw
/// value vector, computed directly. Matches the columnwise pipeline
/// bit-for-bit (same summation order), which lets forecasting code build
/// future rows recursively from extended history.
pub fn engineered_at(values: &[f64], t: usize) -> [FeatureValue; 6] {
    let lag = |k: usize| -> FeatureValue {
        if t >= k {
            Some(values[t - k])
        } else {
            None
        }
    };
    let rmean = |w: usize, k: usize| -> FeatureValue {
        if t < k + w - 1 {
            return None;
        }
        let start = t - k + 1 - w;
        let mut sum = 0.0;
        for v in &values[start..start + w] {
            sum += v;
        }
        Some(sum / w as f64)
    };
    [
        lag(7),
        lag(28),
        rmean(7, 7),
        rmean(28, 7),
        rmean(7, 28),
        rmean(28, 28),
    ]
}

fn dense_id(dict: &mut Vec<String>, value: &str) -> u32 {
    match dict.iter().position(|x| x == value) {
        Some(i) => i as u32,
        None => {
            dict.push(value.to_string());
            dict.len() as u32 - 1
        }
    }
}

/// Builds the full feature matrix from long sales, the calendar and the
/// price table. One row per (series, day); rolling means that are undefined
/// keep their missing markers. Every day must be covered by the calendar.
pub fn build_feature_matrix(
    long: &LongSales,
    calendar: &CalendarTable,
    prices: &PriceTable,
) -> Result<FeatureMatrix> {
    let wide = &long.wide;
    let n_days = wide.n_days;
    if n_days > calendar.n_days() {
        return Err(Error::DataIntegrity(format!(
            "sales day d_{} has no calendar row (calendar ends at d_{})",
            n_days,
            calendar.n_days()
        )));
    }

    // Categorical dictionaries in a single deterministic pass over the
    // sales file order, then per-day event ids from the calendar.
    let mut item_levels = Vec::new();
    let mut dept_levels = Vec::new();
    let mut cat_levels = Vec::new();
    let mut store_levels = Vec::new();
    let mut state_levels = Vec::new();
    let per_series: Vec<[u32; 5]> = (0..wide.n_rows())
        .map(|s| {
            [
                dense_id(&mut item_levels, &wide.item_ids[s]),
                dense_id(&mut dept_levels, &wide.dept_ids[s]),
                dense_id(&mut cat_levels, &wide.cat_ids[s]),
                dense_id(&mut store_levels, &wide.store_ids[s]),
                dense_id(&mut state_levels, &wide.state_ids[s]),
            ]
        })
        .collect();
    let events = EventDicts::from_calendar(calendar);
    let per_day: Vec<(u32, u32, CalendarFeatures, u8, u32)> = (0..n_days)
        .map(|d| {
            let row = &calendar.rows[d];
            let (en, et) = events.event_features(row);
            (en, et, calendar_features(row.date), row.wday, row.wm_yr_wk)
        })
        .collect();

    let n_rows = wide.n_rows() * n_days;
    let mut engineered: Vec<Vec<FeatureValue>> = (0..6).map(|_| Vec::with_capacity(n_rows)).collect();
    let mut week = Vec::with_capacity(n_rows);
    let mut quarter = Vec::with_capacity(n_rows);
    let mut mday = Vec::with_capacity(n_rows);
    let mut wday = Vec::with_capacity(n_rows);
    let mut sell_price = Vec::with_capacity(n_rows);
    let mut event_name = Vec::with_capacity(n_rows);
    let mut event_type = Vec::with_capacity(n_rows);
    let mut cat_cols: Vec<Vec<FeatureValue>> = (0..5).map(|_| Vec::with_capacity(n_rows)).collect();
    let mut row_series = Vec::with_capacity(n_rows);
    let mut days = Vec::with_capacity(n_rows);
    let mut target = Vec::with_capacity(n_rows);

    for s in 0..wide.n_rows() {
        let values: Vec<f64> = wide.sales_for_row(s).iter().map(|&v| v as f64).collect();
        // Columnwise engineered features for this series.
        let lag7: Vec<FeatureValue> = (0..n_days)
            .map(|t| if t >= 7 { Some(values[t - 7]) } else { None })
            .collect();
        let lag28: Vec<FeatureValue> = (0..n_days)
            .map(|t| if t >= 28 { Some(values[t - 28]) } else { None })
            .collect();
        let mut cols = vec![lag7, lag28];
        for (w, k) in LAG_WINDOWS {
            let base = if k == 7 { &cols[0] } else { &cols[1] };
            cols.push(rolling_mean(base, w));
        }

        for t in 0..n_days {
            row_series.push(s as u32);
            days.push(t as u32 + 1);
            target.push(values[t]);
            for (c, col) in cols.iter().enumerate() {
                engineered[c].push(col[t]);
            }
            let (en, et, cf, file_wday, wk) = per_day[t];
            week.push(Some(cf.week as f64));
            quarter.push(Some(cf.quarter as f64));
            mday.push(Some(cf.mday as f64));
            // The calendar file's own weekday id wins over the ISO one.
            wday.push(Some(file_wday as f64));
            sell_price.push(prices.price(&wide.store_ids[s], &wide.item_ids[s], wk));
            event_name.push(Some(en as f64));
            event_type.push(Some(et as f64));
            for (c, col) in cat_cols.iter_mut().enumerate() {
                col.push(Some(per_series[s][c] as f64));
            }
        }
    }

    let mut columns = Vec::new();
    for (i, name) in ENGINEERED.iter().enumerate() {
        columns.push(Column {
            name: name.to_string(),
            kind: ColumnKind::Numeric,
            values: std::mem::take(&mut engineered[i]),
            levels: None,
        });
    }
    for (name, values) in [
        ("week", week),
        ("quarter", quarter),
        ("mday", mday),
        ("wday", wday),
        ("sell_price", sell_price),
    ] {
        columns.push(Column {
            name: name.to_string(),
            kind: ColumnKind::Numeric,
            values,
            levels: None,
        });
    }
    columns.push(Column {
        name: "event_name".to_string(),
        kind: ColumnKind::Categorical,
        values: event_name,
        levels: Some(events.names.clone()),
    });
    columns.push(Column {
        name: "event_type".to_string(),
        kind: ColumnKind::Categorical,
        values: event_type,
        levels: Some(events.types.clone()),
    });
    for (i, (name, levels)) in [
        ("item_id", item_levels),
        ("dept_id", dept_levels),
        ("cat_id", cat_levels),
        ("store_id", store_levels),
        ("state_id", state_levels),
    ]
    .into_iter()
    .enumerate()
    {
        columns.push(Column {
            name: name.to_string(),
            kind: ColumnKind::Categorical,
            values: std::mem::take(&mut cat_cols[i]),
            levels: Some(levels),
        });
    }

    Ok(FeatureMatrix {
        series_names: wide.ids.clone(),
        row_series,
        days,
        target,
        columns,
    })
}

/// Writes the matrix as CSV with the fixed header
/// `series_id,day,target,<columns in matrix order>`; missing values are
/// empty fields and categoricals are written as their dense ids.
pub fn write_features_csv(matrix: &FeatureMatrix, path: impl AsRef<std::path::Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let mut header = vec!["series_id".to_string(), "day".to_string(), "target".to_string()];
    header.extend(matrix.columns.iter().map(|c| c.name.clone()));
    writer.write_record(&header)?;
    for i in 0..matrix.n_rows() {
        let mut record = vec![
            matrix.series_names[matrix.row_series[i] as usize].clone(),
            matrix.days[i].to_string(),
            matrix.target[i].to_string(),
        ];
        for c in &matrix.columns {
            record.push(match c.values[i] {
                Some(v) => v.to_string(),
                None => String::new(),
            });
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}
