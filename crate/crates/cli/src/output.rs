use anyhow::Result;
use bcq_core::numerics::{format_rational, to_decimal};
use bcq_core::theorems::Side;
use num_traits::Signed;

use crate::dispatch::{Point, Row};

const SIG_DIGITS: usize = 12;

pub fn point_label(p: &Point) -> String {
    p.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(", ")
}

fn exact(side: &Side) -> String {
    match side {
        Side::Exact(x) => format_rational(x),
        Side::Enclosed(iv) => format!("[{}, {}]", format_rational(iv.lo()), format_rational(iv.hi())),
    }
}

fn decimal(side: &Side) -> String {
    match side {
        Side::Exact(x) => to_decimal(x, SIG_DIGITS),
        Side::Enclosed(iv) => format!("[{}, {}]", to_decimal(iv.lo(), SIG_DIGITS), to_decimal(iv.hi(), SIG_DIGITS)),
    }
}

/// One row per grid point: axis values, both sides exactly and in decimal, then the margin.
pub fn csv_table(axes: &[&str], rows: &[Row]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = axes.iter().map(|s| s.to_string()).collect();
    header.extend(
        ["lhs", "rhs", "lhs_decimal", "rhs_decimal", "margin", "margin_decimal", "margin_sign", "verdict"]
            .map(String::from),
    );
    w.write_record(&header)?;
    for r in rows {
        let mut rec: Vec<String> = axes.iter().map(|a| r.point.get(*a).map_or(String::new(), u64::to_string)).collect();
        let sign = if r.margin.is_positive() {
            "+"
        } else if r.margin.is_negative() {
            "-"
        } else {
            "0"
        };
        rec.extend([
            exact(&r.lhs),
            exact(&r.rhs),
            decimal(&r.lhs),
            decimal(&r.rhs),
            format_rational(&r.margin),
            to_decimal(&r.margin, SIG_DIGITS),
            sign.to_string(),
            serde_json::to_value(r.verdict)?.as_str().unwrap_or_default().to_string(),
        ]);
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
