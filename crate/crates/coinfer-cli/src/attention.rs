//! Ingestion of externally produced attention traces.
//!
//! The CSV contract is the bridge by which model attention (extracted
//! upstream, by whatever layer/head aggregation policy produced the file)
//! enters the pipeline:
//!
//! ```csv
//! trial_id,K,attn_seg1,attn_seg2,point_estimate
//! 0,50,12.5,3.75,0.62
//! ```

use std::path::Path;

use coinfer_core::metrics::AttentionRecord;

use crate::CliError;

pub const ATTENTION_HEADER: [&str; 5] =
    ["trial_id", "K", "attn_seg1", "attn_seg2", "point_estimate"];

/// Parsed attention file: good rows plus per-line diagnostics for the bad
/// ones (1-based line numbers, counting the header as line 1).
pub struct AttentionFile {
    pub records: Vec<AttentionRecord>,
    pub malformed: Vec<String>,
}

pub fn read_attention_csv(path: &Path) -> Result<AttentionFile, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;

    let header = reader
        .headers()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        .clone();
    if header.iter().collect::<Vec<_>>() != ATTENTION_HEADER {
        return Err(CliError::Config(format!(
            "{}: header must be {}",
            path.display(),
            ATTENTION_HEADER.join(",")
        )));
    }

    let mut records = Vec::new();
    let mut malformed = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let lineno = idx + 2; // header is line 1
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                malformed.push(format!("line {lineno}: {e}"));
                continue;
            }
        };
        match parse_row(&row) {
            Ok(rec) => records.push(rec),
            Err(msg) => malformed.push(format!("line {lineno}: {msg}")),
        }
    }
    Ok(AttentionFile { records, malformed })
}

fn parse_row(row: &csv::StringRecord) -> Result<AttentionRecord, String> {
    if row.len() != 5 {
        return Err(format!("expected 5 fields, got {}", row.len()));
    }
    let trial_id: u64 = row[0].trim().parse().map_err(|_| "bad trial_id")?;
    let switch_point: usize = row[1].trim().parse().map_err(|_| "bad K")?;
    let attn_seg1: f64 = row[2].trim().parse().map_err(|_| "bad attn_seg1")?;
    let attn_seg2: f64 = row[3].trim().parse().map_err(|_| "bad attn_seg2")?;
    let point_estimate: f64 = row[4].trim().parse().map_err(|_| "bad point_estimate")?;
    if attn_seg1 < 0.0 || attn_seg2 < 0.0 {
        return Err("attention masses must be non-negative".into());
    }
    if !(0.0..=1.0).contains(&point_estimate) {
        return Err("point_estimate must lie in [0, 1]".into());
    }
    Ok(AttentionRecord {
        trial_id,
        switch_point,
        attn_seg1,
        attn_seg2,
        point_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_well_formed_rows() {
        let f = write_csv(
            "trial_id,K,attn_seg1,attn_seg2,point_estimate\n\
             0,50,12.5,3.75,0.62\n\
             1,30,4.0,9.0,0.41\n",
        );
        let parsed = read_attention_csv(f.path()).unwrap();
        assert_eq!(parsed.records.len(), 2);
        assert!(parsed.malformed.is_empty());
        assert_eq!(parsed.records[1].switch_point, 30);
    }

    #[test]
    fn reports_malformed_rows_with_line_numbers() {
        let f = write_csv(
            "trial_id,K,attn_seg1,attn_seg2,point_estimate\n\
             0,50,12.5,3.75,0.62\n\
             oops,50,1.0,1.0,0.5\n\
             2,50,-1.0,1.0,0.5\n\
             3,50,1.0,1.0,1.7\n",
        );
        let parsed = read_attention_csv(f.path()).unwrap();
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.malformed.len(), 3);
        assert!(parsed.malformed[0].starts_with("line 3:"));
        assert!(parsed.malformed[1].starts_with("line 4:"));
        assert!(parsed.malformed[2].starts_with("line 5:"));
    }

    #[test]
    fn rejects_wrong_header() {
        let f = write_csv("a,b,c,d,e\n1,2,3,4,0.5\n");
        assert!(matches!(
            read_attention_csv(f.path()),
            Err(CliError::Config(_))
        ));
    }
}
