//! Per-shot measurement records and the delimited shot-table format.
//!
//! Table columns, comma separated, one atom readout per line:
//!
//! ```text
//! t,shot,site,ensemble,quadrature,outcome
//! 0.5,0,3,0,Y,1
//! ```
//!
//! `quadrature` is `X` or `Y`; `outcome` is `1` for a bright (excited)
//! readout. Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Quadrature sub-ensemble of a site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quadrature {
    X,
    Y,
}

impl Quadrature {
    pub fn as_char(self) -> char {
        match self {
            Quadrature::X => 'X',
            Quadrature::Y => 'Y',
        }
    }
}

/// Pooled excited fractions of one shot (or one time point) in both
/// quadratures. `n_x = n_y = 0` marks exact populations with no count
/// information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotRecord {
    pub t: f64,
    pub p_x: f64,
    pub p_y: f64,
    pub n_x: u64,
    pub n_y: u64,
}

impl ShotRecord {
    /// Checked constructor: fractions in `[0, 1]` and `P·n` integral within
    /// 1e-9 whenever `n > 0`.
    pub fn new(t: f64, p_x: f64, p_y: f64, n_x: u64, n_y: u64) -> Result<Self> {
        if !t.is_finite() {
            return Err(invalid(format!("record time must be finite, got {t}")));
        }
        for (name, p, n) in [("p_x", p_x, n_x), ("p_y", p_y, n_y)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("{name} = {p} outside [0, 1]")));
            }
            if n > 0 {
                let k = p * n as f64;
                if (k - k.round()).abs() > 1e-9 {
                    return Err(invalid(format!("{name}·n = {k} is not an integer count")));
                }
            }
        }
        Ok(Self { t, p_x, p_y, n_x, n_y })
    }

    pub fn from_counts(t: f64, k_x: u64, n_x: u64, k_y: u64, n_y: u64) -> Result<Self> {
        if n_x == 0 || n_y == 0 {
            return Err(invalid("each quadrature needs at least one atom"));
        }
        if k_x > n_x || k_y > n_y {
            return Err(invalid(format!("counts ({k_x}/{n_x}, {k_y}/{n_y}) exceed atom numbers")));
        }
        Ok(Self { t, p_x: k_x as f64 / n_x as f64, p_y: k_y as f64 / n_y as f64, n_x, n_y })
    }

    /// True when the two quadratures hold different atom numbers.
    pub fn is_imbalanced(&self) -> bool {
        self.n_x != self.n_y
    }
}

/// One atom readout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotRow {
    pub t: f64,
    pub shot: u64,
    pub site: usize,
    pub ensemble: usize,
    pub quadrature: Quadrature,
    pub outcome: bool,
}

pub const SHOT_TABLE_HEADER: &str = "t,shot,site,ensemble,quadrature,outcome";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ShotTable {
    pub rows: Vec<ShotRow>,
}

impl ShotTable {
    pub fn new(rows: Vec<ShotRow>) -> Self {
        Self { rows }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(24 * (self.rows.len() + 1));
        out.push_str(SHOT_TABLE_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.t,
                r.shot,
                r.site,
                r.ensemble,
                r.quadrature.as_char(),
                u8::from(r.outcome)
            );
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut seen_header = false;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !seen_header {
                if line.replace(' ', "") != SHOT_TABLE_HEADER {
                    return Err(Error::Parse { line: line_no, message: format!("expected header `{SHOT_TABLE_HEADER}`") });
                }
                seen_header = true;
                continue;
            }
            rows.push(parse_row(line).map_err(|message| Error::Parse { line: line_no, message })?);
        }
        if !seen_header {
            return Err(Error::Parse { line: 0, message: "missing header".into() });
        }
        Ok(Self { rows })
    }

    /// Ensemble indices present in the table, ascending.
    pub fn ensembles(&self) -> Vec<usize> {
        let mut e: Vec<usize> = self.rows.iter().map(|r| r.ensemble).collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    /// Pools the rows of one ensemble into one record per `(t, shot)`,
    /// ordered by time then shot. Every group needs both quadratures.
    pub fn records(&self, ensemble: usize) -> Result<Vec<ShotRecord>> {
        let mut rows: Vec<&ShotRow> = self.rows.iter().filter(|r| r.ensemble == ensemble).collect();
        if rows.is_empty() {
            return Err(invalid(format!("no rows for ensemble {ensemble}")));
        }
        rows.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.shot.cmp(&b.shot)));
        let mut out = Vec::new();
        let mut start = 0;
        while start < rows.len() {
            let (t, shot) = (rows[start].t, rows[start].shot);
            let mut end = start;
            let mut counts = [[0u64; 2]; 2];
            while end < rows.len() && rows[end].t == t && rows[end].shot == shot {
                let q = rows[end].quadrature as usize;
                counts[q][0] += u64::from(rows[end].outcome);
                counts[q][1] += 1;
                end += 1;
            }
            let [[kx, nx], [ky, ny]] = counts;
            if nx == 0 || ny == 0 {
                return Err(invalid(format!("ensemble {ensemble}, t={t}, shot {shot}: a quadrature has no atoms")));
            }
            out.push(ShotRecord::from_counts(t, kx, nx, ky, ny)?);
            start = end;
        }
        Ok(out)
    }
}

fn parse_row(line: &str) -> std::result::Result<ShotRow, String> {
    let f: Vec<&str> = line.split(',').map(str::trim).collect();
    if f.len() != 6 {
        return Err(format!("expected 6 fields, found {}", f.len()));
    }
    let num = |i: usize, name: &str| -> std::result::Result<u64, String> {
        f[i].parse::<u64>().map_err(|e| format!("{name}: {e}"))
    };
    let t: f64 = f[0].parse().map_err(|e| format!("t: {e}"))?;
    if !t.is_finite() {
        return Err("t must be finite".into());
    }
    let quadrature = match f[4] {
        "X" | "x" => Quadrature::X,
        "Y" | "y" => Quadrature::Y,
        other => return Err(format!("quadrature must be X or Y, got `{other}`")),
    };
    let outcome = match f[5] {
        "0" => false,
        "1" => true,
        other => return Err(format!("outcome must be 0 or 1, got `{other}`")),
    };
    Ok(ShotRow {
        t,
        shot: num(1, "shot")?,
        site: num(2, "site")? as usize,
        ensemble: num(3, "ensemble")? as usize,
        quadrature,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn record_integrality() {
        assert!(ShotRecord::new(0.0, 0.3, 0.5, 10, 10).is_ok());
        assert!(ShotRecord::new(0.0, 0.35, 0.5, 10, 10).is_err());
        assert!(ShotRecord::new(0.0, 0.35, 0.5, 0, 0).is_ok());
        assert!(ShotRecord::new(0.0, 1.2, 0.5, 0, 0).is_err());
        assert!(ShotRecord::from_counts(0.0, 11, 10, 0, 10).is_err());
        assert!(ShotRecord::from_counts(0.0, 3, 10, 4, 9).unwrap().is_imbalanced());
    }

    #[test]
    fn grouping_pools_quadratures_per_shot() {
        let mut rows = Vec::new();
        for shot in 0..2u64 {
            for site in 0..6usize {
                let quadrature = if site % 2 == 0 { Quadrature::X } else { Quadrature::Y };
                rows.push(ShotRow { t: 1.5, shot, site, ensemble: 0, quadrature, outcome: site < 3 + shot as usize });
            }
        }
        let recs = ShotTable::new(rows).records(0).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!((recs[0].p_x, recs[0].p_y), (2.0 / 3.0, 1.0 / 3.0));
        assert_eq!((recs[1].p_x, recs[1].p_y), (2.0 / 3.0, 2.0 / 3.0));
    }

    #[test]
    fn missing_quadrature_is_an_error() {
        let rows = vec![ShotRow { t: 0.0, shot: 0, site: 0, ensemble: 0, quadrature: Quadrature::X, outcome: true }];
        assert!(ShotTable::new(rows).records(0).is_err());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = format!("{SHOT_TABLE_HEADER}\n0,0,0,0,X,1\n0,0,1,0,Z,1\n");
        match ShotTable::parse(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(ShotTable::parse("a,b\n").is_err());
    }

    fn row_strategy() -> impl Strategy<Value = ShotRow> {
        (-1e6..1e6f64, 0..1000u64, 0..64usize, 0..5usize, any::<bool>(), any::<bool>()).prop_map(|(t, shot, site, ensemble, q, outcome)| ShotRow {
            t,
            shot,
            site,
            ensemble,
            quadrature: if q { Quadrature::Y } else { Quadrature::X },
            outcome,
        })
    }

    proptest! {
        #[test]
        fn text_round_trip(rows in proptest::collection::vec(row_strategy(), 0..40)) {
            let table = ShotTable::new(rows);
            prop_assert_eq!(ShotTable::parse(&table.to_text()).unwrap(), table);
        }
    }
}
