//! Experiment report rows with deterministic CSV and JSON rendering.
//!
//! Every row carries the experiment name, the parameters needed to re-run
//! it (including the seed), the measured value, the bound it is compared
//! against, and the verdict. Rendering is byte-deterministic: fixed column
//! order, shortest-round-trip float formatting, no maps.

use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub experiment: String,
    pub seed: u64,
    pub params: Vec<(String, String)>,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Row {
    pub fn new(experiment: &str, seed: u64, value: f64, bound: f64, pass: bool) -> Self {
        Row { experiment: experiment.to_string(), seed, params: Vec::new(), value, bound, pass }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    fn params_field(&self) -> String {
        self.params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

pub const CSV_HEADER: &str = "experiment,seed,params,value,bound,pass";

/// Rows as CSV. The params column packs `key=value` pairs with `;`.
pub fn to_csv(rows: &[Row]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.experiment,
            r.seed,
            r.params_field(),
            r.value,
            r.bound,
            if r.pass { "PASS" } else { "FAIL" }
        ));
    }
    out
}

#[derive(Serialize)]
struct JsonReport<'a> {
    schema: u32,
    rows: &'a [Row],
}

/// Rows as a versioned JSON document.
pub fn to_json(rows: &[Row]) -> String {
    serde_json::to_string_pretty(&JsonReport { schema: 1, rows })
        .expect("report serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_is_stable_and_readable() {
        let rows = vec![
            Row::new("demo", 7, 1.5, 2.0, true).with("delta", 0.1).with("shells", 20),
            Row::new("demo", 7, 3.0, 2.0, false),
        ];
        let csv = to_csv(&rows);
        let again = to_csv(&rows);
        assert_eq!(csv, again);
        assert!(csv.starts_with("experiment,seed,params,value,bound,pass\n"));
        assert!(csv.contains("demo,7,delta=0.1;shells=20,1.5,2,PASS"));
        assert!(csv.contains("demo,7,,3,2,FAIL"));
        let json = to_json(&rows);
        assert!(json.contains("\"schema\": 1"));
    }
}
