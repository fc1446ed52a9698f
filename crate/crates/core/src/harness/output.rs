use std::fs::File;
use std::path::Path;

use crate::error::Result;

/// Writer for long-format rows `run_id,t,metric,value`.
pub struct TidyWriter {
    inner: csv::Writer<File>,
}

impl TidyWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut inner = csv::Writer::from_path(path)?;
        inner.write_record(["run_id", "t", "metric", "value"])?;
        Ok(TidyWriter { inner })
    }

    pub fn row(&mut self, run_id: &str, t: f64, metric: &str, value: f64) -> Result<()> {
        self.inner.write_record([run_id, &t.to_string(), metric, &value.to_string()])?;
        Ok(())
    }

    pub fn series(&mut self, run_id: &str, metric: &str, series: &[(f64, f64)]) -> Result<()> {
        for (t, v) in series {
            self.row(run_id, *t, metric, *v)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Two-column `metric,value` table.
pub fn write_summary(path: &Path, rows: &[(String, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["metric", "value"])?;
    for (k, v) in rows {
        w.write_record([k.as_str(), &v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tidy_rows_are_quoted_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let mut w = TidyWriter::create(&p).unwrap();
        w.row("a,b", 0.5, "w2", 1.25).unwrap();
        w.finish().unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "run_id,t,metric,value\n\"a,b\",0.5,w2,1.25\n");
    }
}
