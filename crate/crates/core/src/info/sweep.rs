use std::io::Write;

use serde::Serialize;

use crate::Result;

pub const MEASURE_CSV_VERSION: &str = "measures/1";

/// One row of a confounding-measure sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureRow {
    pub variant: String,
    pub r: f64,
    pub n_samples: usize,
    pub pair: String,
    pub cnf_empirical: f64,
    pub cnf_exact: f64,
    pub mi: f64,
}

/// CSV with header `variant,r,n_samples,pair,cnf_empirical,cnf_exact,mi`.
pub fn write_measure_csv<W: Write>(rows: &[MeasureRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_row() {
        let mut buf = Vec::new();
        let row = MeasureRow {
            variant: "cm".into(),
            r: 0.5,
            n_samples: 10,
            pair: "digit~fg".into(),
            cnf_empirical: 1.25,
            cnf_exact: 1.0,
            mi: 0.5,
        };
        write_measure_csv(&[row], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "variant,r,n_samples,pair,cnf_empirical,cnf_exact,mi\ncm,0.5,10,digit~fg,1.25,1.0,0.5\n");
    }
}
