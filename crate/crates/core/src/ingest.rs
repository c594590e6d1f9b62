//! M5-format CSV ingestion: the calendar, wide daily sales, and weekly
//! price tables, plus the wide-to-long reshape and the calendar/price
//! merges. Schemas are strict; malformed rows fail with their line number
//! rather than being silently coerced.

use std::collections::HashMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-date metadata from calendar.csv. `day_index` is the n of the "d_n"
/// label. The snap flags are parsed and retained but feed nothing downstream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalendarRow {
    pub date: NaiveDate,
    pub wm_yr_wk: u32,
    pub weekday: String,
    /// M5 weekday id, Saturday = 1.
    pub wday: u8,
    pub month: u8,
    pub year: u16,
    pub day_index: u32,
    pub event_name_1: Option<String>,
    pub event_type_1: Option<String>,
    pub event_name_2: Option<String>,
    pub event_type_2: Option<String>,
    pub snap: Vec<u8>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalendarTable {
    pub rows: Vec<CalendarRow>,
    /// Names of the snap_* columns, in file order.
    pub snap_states: Vec<String>,
}

impl CalendarTable {
    /// Calendar row for a 1-based day index; rows are stored densely from d_1.
    pub fn row_for_day(&self, day: u32) -> Option<&CalendarRow> {
        if day == 0 {
            return None;
        }
        self.rows.get(day as usize - 1)
    }

    pub fn n_days(&self) -> usize {
        self.rows.len()
    }
}

/// Wide-format sales: one row per (item, store) series, one column per day.
/// Unit sales are non-negative integers.
#[derive(Debug, Clone)]
pub struct SalesWide {
    pub ids: Vec<String>,
    pub item_ids: Vec<String>,
    pub dept_ids: Vec<String>,
    pub cat_ids: Vec<String>,
    pub store_ids: Vec<String>,
    pub state_ids: Vec<String>,
    pub n_days: usize,
    /// Row-major n_rows x n_days grid.
    pub sales: Vec<u32>,
}

impl SalesWide {
    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn sales_for_row(&self, row: usize) -> &[u32] {
        &self.sales[row * self.n_days..(row + 1) * self.n_days]
    }
}

/// Weekly prices keyed by (store, item, wm_yr_wk); the key is unique.
#[derive(Debug, Clone)]
pub struct PriceTable {
    stores: Vec<String>,
    items: Vec<String>,
    store_lookup: HashMap<String, u32>,
    item_lookup: HashMap<String, u32>,
    /// Sorted by (store, item, week) for binary search.
    entries: Vec<(u32, u32, u32, f64)>,
}

impl PriceTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Price of (store, item) in Walmart week `wm_yr_wk`, if listed.
    pub fn price(&self, store_id: &str, item_id: &str, wm_yr_wk: u32) -> Option<f64> {
        let s = *self.store_lookup.get(store_id)?;
        let i = *self.item_lookup.get(item_id)?;
        self.entries
            .binary_search_by(|e| (e.0, e.1, e.2).cmp(&(s, i, wm_yr_wk)))
            .ok()
            .map(|idx| self.entries[idx].3)
    }
}

/// Long-format sales: the wide grid re-indexed as one row per (series, day),
/// ordered by wide row then ascending day. Stored columnar; [`LongRow`]
/// materializes individual rows.
#[derive(Debug, Clone)]
pub struct LongSales {
    pub wide: SalesWide,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongRow<'a> {
    pub id: &'a str,
    pub item_id: &'a str,
    pub dept_id: &'a str,
    pub cat_id: &'a str,
    pub store_id: &'a str,
    pub state_id: &'a str,
    pub day: u32,
    pub unit_sales: u32,
}

impl LongSales {
    pub fn n_rows(&self) -> usize {
        self.wide.n_rows() * self.wide.n_days
    }

    pub fn row(&self, idx: usize) -> LongRow<'_> {
        let series = idx / self.wide.n_days;
        let day = (idx % self.wide.n_days) as u32 + 1;
        LongRow {
            id: &self.wide.ids[series],
            item_id: &self.wide.item_ids[series],
            dept_id: &self.wide.dept_ids[series],
            cat_id: &self.wide.cat_ids[series],
            store_id: &self.wide.store_ids[series],
            state_id: &self.wide.state_ids[series],
            day,
            unit_sales: self.wide.sales[series * self.wide.n_days + day as usize - 1],
        }
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = LongRow<'_>> {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    /// Inverse reshape; the round trip is the identity.
    pub fn pivot_wide(&self) -> SalesWide {
        self.wide.clone()
    }
}

/// Long sales with the calendar joined on day label and prices joined on
/// (store, item, week). Join keys were validated unique at parse time, so
/// neither join can fan out; rows are preserved exactly.
#[derive(Debug, Clone)]
pub struct MergedTable {
    pub long: LongSales,
    pub calendar: CalendarTable,
    pub prices: PriceTable,
}

#[derive(Debug, Clone)]
pub struct MergedRow<'a> {
    pub sales: LongRow<'a>,
    pub calendar: &'a CalendarRow,
    pub sell_price: Option<f64>,
}

impl MergedTable {
    pub fn n_rows(&self) -> usize {
        self.long.n_rows()
    }

    pub fn row(&self, idx: usize) -> MergedRow<'_> {
        let sales = self.long.row(idx);
        let calendar = self
            .calendar
            .row_for_day(sales.day)
            .expect("day coverage validated in merge_all");
        let sell_price = self
            .prices
            .price(sales.store_id, sales.item_id, calendar.wm_yr_wk);
        MergedRow {
            sales,
            calendar,
            sell_price,
        }
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = MergedRow<'_>> {
        (0..self.n_rows()).map(move |i| self.row(i))
    }
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn header_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

fn require_column(path: &Path, headers: &csv::StringRecord, name: &str) -> Result<usize> {
    header_index(headers, name)
        .ok_or_else(|| parse_error(path, 1, format!("missing required column '{}'", name)))
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn optional_string(v: Option<&str>) -> Option<String> {
    match v {
        Some(s) if !s.is_empty() => Some(s.to_string()),
        _ => None,
    }
}

/// Parses calendar.csv. Day labels must run consecutively from d_1 and
/// dates must be strictly increasing; unknown extra columns are ignored
/// with a warning.
pub fn parse_calendar(path: impl AsRef<Path>) -> Result<CalendarTable> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();

    let idx_date = require_column(path, &headers, "date")?;
    let idx_week = require_column(path, &headers, "wm_yr_wk")?;
    let idx_weekday = require_column(path, &headers, "weekday")?;
    let idx_wday = require_column(path, &headers, "wday")?;
    let idx_month = require_column(path, &headers, "month")?;
    let idx_year = require_column(path, &headers, "year")?;
    let idx_d = require_column(path, &headers, "d")?;
    let idx_en1 = require_column(path, &headers, "event_name_1")?;
    let idx_et1 = require_column(path, &headers, "event_type_1")?;
    let idx_en2 = header_index(&headers, "event_name_2");
    let idx_et2 = header_index(&headers, "event_type_2");

    let mut snap_columns: Vec<(usize, String)> = Vec::new();
    let known = [
        "date",
        "wm_yr_wk",
        "weekday",
        "wday",
        "month",
        "year",
        "d",
        "event_name_1",
        "event_type_1",
        "event_name_2",
        "event_type_2",
    ];
    for (i, h) in headers.iter().enumerate() {
        if let Some(state) = h.strip_prefix("snap_") {
            snap_columns.push((i, state.to_string()));
        } else if !known.contains(&h) {
            log::warn!("calendar column '{}' is not part of the schema; ignored", h);
        }
    }

    let mut rows = Vec::new();
    let mut prev_date: Option<NaiveDate> = None;
    for record in reader.records() {
        let record = record?;
        let line = record_line(&record);
        let get = |i: usize| record.get(i).unwrap_or("");

        let date = NaiveDate::parse_from_str(get(idx_date), "%Y-%m-%d")
            .map_err(|e| parse_error(path, line, format!("malformed date '{}': {}", get(idx_date), e)))?;
        if let Some(prev) = prev_date {
            if date <= prev {
                return Err(parse_error(
                    path,
                    line,
                    format!("dates must be strictly increasing ({} after {})", date, prev),
                ));
            }
        }
        prev_date = Some(date);

        let d_label = get(idx_d);
        let day_index: u32 = d_label
            .strip_prefix("d_")
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| parse_error(path, line, format!("malformed day label '{}'", d_label)))?;
        if day_index as usize != rows.len() + 1 {
            return Err(parse_error(
                path,
                line,
                format!(
                    "day labels must be consecutive from d_1; expected d_{}, got {}",
                    rows.len() + 1,
                    d_label
                ),
            ));
        }

        let parse_num = |i: usize, what: &str| -> Result<u32> {
            get(i)
                .parse()
                .map_err(|_| parse_error(path, line, format!("malformed {} '{}'", what, get(i))))
        };

        rows.push(CalendarRow {
            date,
            wm_yr_wk: parse_num(idx_week, "wm_yr_wk")?,
            weekday: get(idx_weekday).to_string(),
            wday: parse_num(idx_wday, "wday")? as u8,
            month: parse_num(idx_month, "month")? as u8,
            year: parse_num(idx_year, "year")? as u16,
            day_index,
            event_name_1: optional_string(record.get(idx_en1)),
            event_type_1: optional_string(record.get(idx_et1)),
            event_name_2: idx_en2.and_then(|i| optional_string(record.get(i))),
            event_type_2: idx_et2.and_then(|i| optional_string(record.get(i))),
            snap: snap_columns
                .iter()
                .map(|(i, _)| get(*i).parse().unwrap_or(0))
                .collect(),
        });
    }

    Ok(CalendarTable {
        rows,
        snap_states: snap_columns.into_iter().map(|(_, s)| s).collect(),
    })
}

/// Parses the wide sales file (sales_train_validation.csv or the
/// *_evaluation variant): six id columns then consecutive d_1..d_N columns.
pub fn parse_sales_wide(path: impl AsRef<Path>) -> Result<SalesWide> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();

    let idx_id = require_column(path, &headers, "id")?;
    let idx_item = require_column(path, &headers, "item_id")?;
    let idx_dept = require_column(path, &headers, "dept_id")?;
    let idx_cat = require_column(path, &headers, "cat_id")?;
    let idx_store = require_column(path, &headers, "store_id")?;
    let idx_state = require_column(path, &headers, "state_id")?;

    let mut day_cols = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if let Some(n) = h.strip_prefix("d_") {
            let n: usize = n
                .parse()
                .map_err(|_| parse_error(path, 1, format!("malformed day column '{}'", h)))?;
            if n != day_cols.len() + 1 {
                return Err(parse_error(
                    path,
                    1,
                    format!("day columns must be consecutive from d_1; got '{}'", h),
                ));
            }
            day_cols.push(i);
        }
    }
    if day_cols.is_empty() {
        return Err(parse_error(path, 1, "no d_1.. day columns present"));
    }

    let mut out = SalesWide {
        ids: Vec::new(),
        item_ids: Vec::new(),
        dept_ids: Vec::new(),
        cat_ids: Vec::new(),
        store_ids: Vec::new(),
        state_ids: Vec::new(),
        n_days: day_cols.len(),
        sales: Vec::new(),
    };
    for record in reader.records() {
        let record = record?;
        let line = record_line(&record);
        let get = |i: usize| record.get(i).unwrap_or("");
        out.ids.push(get(idx_id).to_string());
        out.item_ids.push(get(idx_item).to_string());
        out.dept_ids.push(get(idx_dept).to_string());
        out.cat_ids.push(get(idx_cat).to_string());
        out.store_ids.push(get(idx_store).to_string());
        out.state_ids.push(get(idx_state).to_string());
        for &col in &day_cols {
            let raw = get(col);
            let v: i64 = raw
                .parse()
                .map_err(|_| parse_error(path, line, format!("malformed unit sales '{}'", raw)))?;
            if v < 0 {
                return Err(Error::DataIntegrity(format!(
                    "{} line {}: negative unit sales {}",
                    path.display(),
                    line,
                    v
                )));
            }
            out.sales.push(v as u32);
        }
    }
    Ok(out)
}

/// Parses sell_prices.csv; (store, item, week) must be unique and prices
/// strictly positive.
pub fn parse_prices(path: impl AsRef<Path>) -> Result<PriceTable> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();

    let idx_store = require_column(path, &headers, "store_id")?;
    let idx_item = require_column(path, &headers, "item_id")?;
    let idx_week = require_column(path, &headers, "wm_yr_wk")?;
    let idx_price = require_column(path, &headers, "sell_price")?;

    let mut stores: Vec<String> = Vec::new();
    let mut items: Vec<String> = Vec::new();
    let mut store_lookup: HashMap<String, u32> = HashMap::new();
    let mut item_lookup: HashMap<String, u32> = HashMap::new();
    let mut entries: Vec<(u32, u32, u32, f64)> = Vec::new();

    for record in reader.records() {
        let record = record?;
        let line = record_line(&record);
        let get = |i: usize| record.get(i).unwrap_or("");

        let store = get(idx_store);
        let s = *store_lookup.entry(store.to_string()).or_insert_with(|| {
            stores.push(store.to_string());
            stores.len() as u32 - 1
        });
        let item = get(idx_item);
        let it = *item_lookup.entry(item.to_string()).or_insert_with(|| {
            items.push(item.to_string());
            items.len() as u32 - 1
        });
        let week: u32 = get(idx_week)
            .parse()
            .map_err(|_| parse_error(path, line, format!("malformed wm_yr_wk '{}'", get(idx_week))))?;
        let price: f64 = get(idx_price)
            .parse()
            .map_err(|_| parse_error(path, line, format!("malformed sell_price '{}'", get(idx_price))))?;
        if !(price > 0.0) {
            return Err(Error::DataIntegrity(format!(
                "{} line {}: sell_price must be positive, got {}",
                path.display(),
                line,
                price
            )));
        }
        entries.push((s, it, week, price));
    }

    entries.sort_unstable_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
    for w in entries.windows(2) {
        if (w[0].0, w[0].1, w[0].2) == (w[1].0, w[1].1, w[1].2) {
            return Err(Error::DataIntegrity(format!(
                "duplicate price key (store {}, item {}, week {})",
                stores[w[0].0 as usize], items[w[0].1 as usize], w[0].2
            )));
        }
    }

    Ok(PriceTable {
        stores,
        items,
        store_lookup,
        item_lookup,
        entries,
    })
}

/// Reshapes wide sales to long format: one row per (series, day), ordered
/// by wide row then ascending day.
pub fn melt_wide_to_long(sales: SalesWide) -> LongSales {
    LongSales { wide: sales }
}

/// Left-joins the calendar (on day label) and prices (on store, item, week)
/// onto the long sales. Every day index must be covered by the calendar.
pub fn merge_all(
    long: LongSales,
    calendar: CalendarTable,
    prices: PriceTable,
) -> Result<MergedTable> {
    if long.wide.n_days > calendar.n_days() {
        return Err(Error::DataIntegrity(format!(
            "sales cover day d_{} but the calendar ends at d_{}",
            long.wide.n_days,
            calendar.n_days()
        )));
    }
    Ok(MergedTable {
        long,
        calendar,
        prices,
    })
}

/// Writes the merged table as a long-format CSV with the fixed header
/// documented in the README.
pub fn write_long_csv(merged: &MergedTable, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record([
        "id",
        "item_id",
        "dept_id",
        "cat_id",
        "store_id",
        "state_id",
        "d",
        "unit_sales",
        "date",
        "wm_yr_wk",
        "weekday",
        "wday",
        "month",
        "year",
        "event_name_1",
        "event_type_1",
        "event_name_2",
        "event_type_2",
        "sell_price",
    ])?;
    for row in merged.iter_rows() {
        let c = row.calendar;
        writer.write_record([
            row.sales.id,
            row.sales.item_id,
            row.sales.dept_id,
            row.sales.cat_id,
            row.sales.store_id,
            row.sales.state_id,
            &format!("d_{}", row.sales.day),
            &row.sales.unit_sales.to_string(),
            &c.date.to_string(),
            &c.wm_yr_wk.to_string(),
            &c.weekday,
            &c.wday.to_string(),
            &c.month.to_string(),
            &c.year.to_string(),
            c.event_name_1.as_deref().unwrap_or(""),
            c.event_type_1.as_deref().unwrap_or(""),
            c.event_name_2.as_deref().unwrap_or(""),
            c.event_type_2.as_deref().unwrap_or(""),
            &row.sell_price.map(|p| p.to_string()).unwrap_or_default(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
