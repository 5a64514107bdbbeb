use std::io::Write;

use super::AgentsError;

/// Streams training metrics as CSV rows with a fixed header.
pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
    columns: usize,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(out: W, header: &[&str]) -> Result<Self, AgentsError> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(header).map_err(|e| AgentsError::Metrics(e.to_string()))?;
        Ok(MetricsWriter { inner, columns: header.len() })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<(), AgentsError> {
        if values.len() != self.columns {
            return Err(AgentsError::Width { expected: self.columns, got: values.len() });
        }
        let rec: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        self.inner.write_record(&rec).map_err(|e| AgentsError::Metrics(e.to_string()))
    }

    pub fn finish(mut self) -> Result<W, AgentsError> {
        self.inner.flush().map_err(|e| AgentsError::Metrics(e.to_string()))?;
        self.inner.into_inner().map_err(|e| AgentsError::Metrics(e.to_string()))
    }
}
