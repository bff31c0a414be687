use super::experiment::ResultRow;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

const REFERENCE_CSV: &str = include_str!("../../data/reference_tables.csv");

/// Iteration band (absolute) and κ band (relative) used for table comparisons.
pub const ITERATION_BAND: i64 = 4;
pub const KAPPA_BAND: f64 = 0.30;

/// Published value of one table cell.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ReferenceRow {
    pub table: usize,
    pub family: String,
    #[serde(rename = "inv_H")]
    pub inv_big_h: usize,
    pub inv_h: usize,
    pub iterations: usize,
    pub kappa: Option<f64>,
}

pub fn reference_rows() -> Vec<ReferenceRow> {
    csv::Reader::from_reader(REFERENCE_CSV.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .expect("bundled reference table parses")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffRow {
    pub table: usize,
    pub family: String,
    #[serde(rename = "inv_H")]
    pub inv_big_h: usize,
    pub inv_h: usize,
    pub ref_iterations: usize,
    pub iterations: usize,
    pub ref_kappa: Option<f64>,
    pub kappa: Option<f64>,
    /// κ / κ_ref - 1
    pub kappa_rel_diff: Option<f64>,
    pub within_band: bool,
}

/// Pairs computed rows with the bundled values of `table`.
pub fn compare_to_reference(table: usize, rows: &[ResultRow]) -> Vec<DiffRow> {
    let refs = reference_rows();
    rows.iter()
        .filter_map(|r| {
            let rf = refs.iter().find(|x| {
                x.table == table && x.family == r.family && x.inv_big_h == r.inv_big_h && x.inv_h == r.inv_h
            })?;
            let kappa_rel_diff = match (r.kappa, rf.kappa) {
                (Some(k), Some(k0)) => Some(k / k0 - 1.0),
                _ => None,
            };
            let it_ok = (r.iterations as i64 - rf.iterations as i64).abs() <= ITERATION_BAND;
            let k_ok = match rf.kappa {
                None => true,
                Some(_) => kappa_rel_diff.is_some_and(|d| d.abs() <= KAPPA_BAND),
            };
            Some(DiffRow {
                table,
                family: r.family.clone(),
                inv_big_h: r.inv_big_h,
                inv_h: r.inv_h,
                ref_iterations: rf.iterations,
                iterations: r.iterations,
                ref_kappa: rf.kappa,
                kappa: r.kappa,
                kappa_rel_diff,
                within_band: it_ok && k_ok && r.converged,
            })
        })
        .collect()
}

pub fn format_diff_table(rows: &[DiffRow]) -> String {
    let mut s = String::new();
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
    writeln!(s, "table family  1/H 1/h   it(ref)  it   κ(ref)    κ     Δκ      band").unwrap();
    for r in rows {
        writeln!(
            s,
            "{:>5} {:<6} {:>4} {:>4} {:>8} {:>4} {:>8} {:>6} {:>7} {}",
            r.table,
            r.family,
            r.inv_big_h,
            r.inv_h,
            r.ref_iterations,
            r.iterations,
            opt(r.ref_kappa),
            opt(r.kappa),
            r.kappa_rel_diff.map_or("-".into(), |d| format!("{:+.1}%", 100.0 * d)),
            if r.within_band { "ok" } else { "OUT" }
        )
        .unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_tables_are_complete() {
        let rows = reference_rows();
        assert_eq!(rows.len(), 4 * 4 * 15);
        let cell = |t: usize, f: &str, big: usize, h: usize| {
            rows.iter().find(|r| r.table == t && r.family == f && r.inv_big_h == big && r.inv_h == h).unwrap()
        };
        assert_eq!(cell(1, "QUAD", 8, 32).iterations, 140);
        assert_eq!(cell(2, "QUAD", 8, 32).iterations, 22);
        assert_eq!(cell(3, "QUAD", 2, 8).kappa, Some(1.82));
        assert_eq!(cell(4, "HEXA", 4, 16).kappa, Some(4.21));
        assert_eq!(cell(3, "CVT", 32, 128).iterations, 35);
        assert_eq!(cell(1, "CVT", 32, 128).iterations, 2522);
        assert!(rows.iter().filter(|r| r.table <= 2).all(|r| r.kappa.is_none()));
        assert!(rows.iter().filter(|r| r.table >= 3).all(|r| r.kappa.is_some()));
    }
}
