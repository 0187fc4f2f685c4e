//! CSV ingestion and emission for factor/return panels.
//!
//! Factors file: header `date,asset_id,f1,...,fK`, ISO-8601 dates, empty
//! cell = missing value. Returns file: header `date,asset_id,ret` with
//! simple daily returns (0.01 = 1%). Lines starting with `#` are header
//! comments embedding the producing config and are skipped on read.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};

use crate::data::FactorPanel;
use crate::error::{Error, Result};

fn parse_date(s: &str, line: u64) -> Result<String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|_| Error::data(format!("line {line}: bad ISO-8601 date '{s}'")))?;
    Ok(s.to_string())
}

struct RawTable {
    /// (date, asset) -> cells, insertion-checked for duplicates.
    cells: BTreeMap<(String, String), Vec<f64>>,
    dates: BTreeSet<String>,
    assets: BTreeSet<String>,
    width: usize,
}

fn read_table(path: &Path, expect_ret: bool) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?
        .clone();
    if headers.len() < 3 || &headers[0] != "date" || &headers[1] != "asset_id" {
        return Err(Error::data(format!(
            "{}: header must start with date,asset_id",
            path.display()
        )));
    }
    if expect_ret && (headers.len() != 3 || &headers[2] != "ret") {
        return Err(Error::data(format!(
            "{}: returns header must be date,asset_id,ret",
            path.display()
        )));
    }
    let width = headers.len() - 2;
    let mut table = RawTable {
        cells: BTreeMap::new(),
        dates: BTreeSet::new(),
        assets: BTreeSet::new(),
        width,
    };
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != headers.len() {
            return Err(Error::data(format!(
                "line {line}: expected {} fields, got {}",
                headers.len(),
                rec.len()
            )));
        }
        let date = parse_date(rec[0].trim(), line)?;
        let asset = rec[1].trim().to_string();
        if asset.is_empty() {
            return Err(Error::data(format!("line {line}: empty asset_id")));
        }
        let mut vals = Vec::with_capacity(width);
        for j in 0..width {
            let cell = rec[j + 2].trim();
            if cell.is_empty() {
                vals.push(f64::NAN); // missing
            } else {
                let v: f64 = cell.parse().map_err(|_| {
                    Error::data(format!("line {line}: unparseable number '{cell}'"))
                })?;
                if !v.is_finite() {
                    return Err(Error::data(format!("line {line}: non-finite value '{cell}'")));
                }
                vals.push(v);
            }
        }
        let key = (date.clone(), asset.clone());
        if table.cells.insert(key, vals).is_some() {
            return Err(Error::data(format!(
                "duplicate (date, asset) row ({date}, {asset})"
            )));
        }
        table.dates.insert(date);
        table.assets.insert(asset);
    }
    if table.cells.is_empty() {
        return Err(Error::data(format!("{}: no data rows", path.display())));
    }
    Ok(table)
}

/// Assets present on every date of the table. For returns the single cell
/// must also be non-missing.
fn complete_assets(table: &RawTable, require_value: bool) -> BTreeSet<String> {
    table
        .assets
        .iter()
        .filter(|a| {
            table.dates.iter().all(|d| {
                match table.cells.get(&(d.clone(), (*a).clone())) {
                    Some(vals) => !require_value || vals.iter().all(|v| v.is_finite()),
                    None => false,
                }
            })
        })
        .cloned()
        .collect()
}

/// Load a raw panel from a factors file and a returns file.
///
/// Each factor date is paired with the next strictly later return date
/// (one-day factor lead in daily data); factor dates without a following
/// return date are dropped. Assets are restricted to those with complete
/// coverage in both files; the dropped count is logged.
pub fn load_panel(factors_path: &Path, returns_path: &Path) -> Result<FactorPanel> {
    let ftab = read_table(factors_path, false)?;
    let rtab = read_table(returns_path, true)?;

    let f_complete = complete_assets(&ftab, false);
    let r_complete = complete_assets(&rtab, true);
    let assets: Vec<String> = f_complete.intersection(&r_complete).cloned().collect();
    let dropped = ftab.assets.union(&rtab.assets).count() - assets.len();
    if dropped > 0 {
        log::warn!("dropped {dropped} asset(s) without complete coverage");
    }
    if assets.is_empty() {
        return Err(Error::data("no asset has complete coverage in both files"));
    }

    // Pair each factor date with the next strictly later return date,
    // consuming return dates in order.
    let fdates: Vec<&String> = ftab.dates.iter().collect();
    let rdates: Vec<&String> = rtab.dates.iter().collect();
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut j = 0usize;
    for fd in &fdates {
        while j < rdates.len() && rdates[j].as_str() <= fd.as_str() {
            j += 1;
        }
        if j == rdates.len() {
            break;
        }
        pairs.push(((*fd).clone(), rdates[j].clone()));
        j += 1;
    }
    if pairs.is_empty() {
        return Err(Error::data(
            "factor and return dates do not overlap: no usable pairs",
        ));
    }

    let d = assets.len();
    let k = ftab.width;
    let mut factors = Vec::with_capacity(pairs.len());
    let mut returns = Vec::with_capacity(pairs.len());
    for (fd, rd) in &pairs {
        let fm = DMatrix::from_fn(d, k, |i, jf| {
            ftab.cells[&(fd.clone(), assets[i].clone())][jf]
        });
        let rv = DVector::from_fn(d, |i, _| rtab.cells[&(rd.clone(), assets[i].clone())][0]);
        factors.push(fm);
        returns.push(rv);
    }
    FactorPanel::new(
        assets,
        pairs.iter().map(|(f, _)| f.clone()).collect(),
        pairs.iter().map(|(_, r)| r.clone()).collect(),
        factors,
        returns,
    )
}

/// Write a panel back out as the factors/returns CSV pair, with `#`
/// header comments (producing config and seed) prepended to both files.
pub fn write_panel_csvs(
    panel: &FactorPanel,
    factors_path: &Path,
    returns_path: &Path,
    comments: &[String],
) -> Result<()> {
    let mut f = std::fs::File::create(factors_path)?;
    for c in comments {
        writeln!(f, "# {c}")?;
    }
    let k = panel.n_factors();
    let header: Vec<String> = ["date".to_string(), "asset_id".to_string()]
        .into_iter()
        .chain((1..=k).map(|i| format!("f{i}")))
        .collect();
    writeln!(f, "{}", header.join(","))?;
    for t in 0..panel.n_pairs() {
        let fm = panel.factors_at(t);
        for (i, asset) in panel.asset_ids().iter().enumerate() {
            let mut row = vec![panel.factor_date(t).to_string(), asset.clone()];
            for j in 0..k {
                let v = fm[(i, j)];
                row.push(if v.is_finite() { format!("{v}") } else { String::new() });
            }
            writeln!(f, "{}", row.join(","))?;
        }
    }

    let mut r = std::fs::File::create(returns_path)?;
    for c in comments {
        writeln!(r, "# {c}")?;
    }
    writeln!(r, "date,asset_id,ret")?;
    for t in 0..panel.n_pairs() {
        let rv = panel.returns_at(t);
        for (i, asset) in panel.asset_ids().iter().enumerate() {
            writeln!(r, "{},{},{}", panel.return_date(t), asset, rv[i])?;
        }
    }
    Ok(())
}
