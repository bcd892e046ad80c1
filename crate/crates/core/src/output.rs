//! CSV emission. Numbers use the shortest decimal form that parses back to
//! the same `f64`; rows end in LF.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::fluctuations::CmSample;
use crate::measures::WignerGrid;
use crate::moments::TrajectorySample;

pub const FIRST_MOMENTS_HEADER: &str = "t,q,p,re_a,im_a,re_c,im_c";
pub const COUPLING_HEADER: &str = "t,re_G,im_G,re_G_target,im_G_target";
pub const MEASURES_HEADER: &str = "t,EN,v11,v22,neff,r_db";
pub const WIGNER_HEADER: &str = "x,y,w";

/// Shortest round-trip representation; scientific notation outside
/// `[1e-5, 1e16)`.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn cm_header() -> String {
    let mut h = String::from("t");
    for i in 1..=6 {
        for j in i..=6 {
            write!(h, ",v{i}{j}").unwrap();
        }
    }
    h
}

/// Accumulates a CSV document in memory.
#[derive(Debug, Clone, Default)]
pub struct CsvTable {
    text: String,
}

impl CsvTable {
    pub fn new(header: &str) -> Self {
        Self {
            text: format!("{header}\n"),
        }
    }

    pub fn row(&mut self, values: &[f64]) {
        let line: Vec<String> = values.iter().map(|&v| format_number(v)).collect();
        self.text.push_str(&line.join(","));
        self.text.push('\n');
    }

    /// Row with a leading block of numbers followed by preformatted fields.
    pub fn mixed_row(&mut self, values: &[f64], fields: &[&str]) {
        let mut line: Vec<String> = values.iter().map(|&v| format_number(v)).collect();
        line.extend(fields.iter().map(|s| s.to_string()));
        self.text.push_str(&line.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        fs::write(path, &self.text)
    }
}

pub fn first_moments_table(samples: &[TrajectorySample]) -> CsvTable {
    let mut t = CsvTable::new(FIRST_MOMENTS_HEADER);
    for s in samples {
        let mut row = vec![s.t];
        row.extend_from_slice(&s.state.to_array());
        t.row(&row);
    }
    t
}

pub fn cm_table(samples: &[CmSample]) -> CsvTable {
    let mut t = CsvTable::new(&cm_header());
    for s in samples {
        let mut row = vec![s.t];
        row.extend(s.cm.upper_triangle());
        t.row(&row);
    }
    t
}

pub fn wigner_table(grid: &WignerGrid) -> CsvTable {
    let mut t = CsvTable::new(WIGNER_HEADER);
    for (x, col) in grid.x.iter().zip(&grid.values) {
        for (y, w) in grid.y.iter().zip(col) {
            t.row(&[*x, *y, *w]);
        }
    }
    t
}
