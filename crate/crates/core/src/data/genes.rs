//! Gene records and their tab-separated interchange format.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strand {
    Forward,
    Reverse,
}

impl Strand {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "+" => Ok(Strand::Forward),
            "-" => Ok(Strand::Reverse),
            other => Err(Error::Domain(format!("invalid strand `{other}`"))),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Strand::Forward => "+",
            Strand::Reverse => "-",
        }
    }
}

/// One protein-coding gene on a scaffold. Coordinates are 1-based and
/// inclusive on both ends.
#[derive(Debug, Clone)]
pub struct GeneRecord {
    pub scaffold_id: String,
    pub gene_id: String,
    pub start: u64,
    pub end: u64,
    pub strand: Strand,
    pub sequence: Option<String>,
}

impl GeneRecord {
    pub fn validate(&self) -> Result<()> {
        if self.end < self.start {
            return Err(Error::Domain(format!(
                "gene {} has end {} before start {}",
                self.gene_id, self.end, self.start
            )));
        }
        Ok(())
    }
}

const HEADER: &str = "scaffold_id\tgene_id\tstart\tend\tstrand\tsequence";

/// Parse the gene TSV format. The header line is required; the sequence
/// column may be empty.
pub fn parse_gene_records(text: &str) -> Result<Vec<GeneRecord>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("gene file is empty".into()))?;
    if !header.starts_with("scaffold_id\tgene_id\tstart\tend\tstrand") {
        return Err(Error::Format(format!(
            "gene file must start with `{HEADER}` header, got `{header}`"
        )));
    }
    let mut records = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 5 {
            return Err(Error::Format(format!(
                "gene line {} has {} fields, need at least 5",
                lineno + 2,
                fields.len()
            )));
        }
        let record = GeneRecord {
            scaffold_id: fields[0].to_string(),
            gene_id: fields[1].to_string(),
            start: fields[2]
                .parse()
                .map_err(|_| Error::Format(format!("bad start `{}`", fields[2])))?,
            end: fields[3]
                .parse()
                .map_err(|_| Error::Format(format!("bad end `{}`", fields[3])))?,
            strand: Strand::parse(fields[4])?,
            sequence: fields
                .get(5)
                .filter(|s| !s.is_empty())
                .map(|s| s.to_string()),
        };
        record.validate()?;
        if !seen.insert((record.scaffold_id.clone(), record.gene_id.clone())) {
            return Err(Error::Domain(format!(
                "duplicate gene id {} on scaffold {}",
                record.gene_id, record.scaffold_id
            )));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn read_gene_records(path: &Path) -> Result<Vec<GeneRecord>> {
    parse_gene_records(&fs::read_to_string(path)?)
}

pub fn format_gene_records(records: &[GeneRecord]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            r.scaffold_id,
            r.gene_id,
            r.start,
            r.end,
            r.strand.symbol(),
            r.sequence.as_deref().unwrap_or("")
        ));
    }
    out
}

pub fn write_gene_records(path: &Path, records: &[GeneRecord]) -> Result<()> {
    fs::write(path, format_gene_records(records))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_with_and_without_sequence() {
        let text = "scaffold_id\tgene_id\tstart\tend\tstrand\tsequence\n\
                    s1\tg1\t100\t400\t+\tMKV\n\
                    s1\tg2\t450\t900\t-\t\n";
        let records = parse_gene_records(text).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].sequence.as_deref(), Some("MKV"));
        assert!(records[1].sequence.is_none());
        assert_eq!(records[1].strand, Strand::Reverse);
        let reparsed = parse_gene_records(&format_gene_records(&records)).unwrap();
        assert_eq!(reparsed.len(), 2);
        assert_eq!(reparsed[0].start, 100);
    }

    #[test]
    fn missing_header_is_rejected() {
        assert!(parse_gene_records("s1\tg1\t1\t2\t+\n").is_err());
    }

    #[test]
    fn inverted_coordinates_are_rejected() {
        let text = "scaffold_id\tgene_id\tstart\tend\tstrand\tsequence\ns1\tg1\t400\t100\t+\t\n";
        assert!(parse_gene_records(text).is_err());
    }

    #[test]
    fn duplicate_gene_ids_on_a_scaffold_are_rejected() {
        let text = "scaffold_id\tgene_id\tstart\tend\tstrand\tsequence\n\
                    s1\tg1\t1\t10\t+\t\ns1\tg1\t20\t30\t+\t\n";
        assert!(parse_gene_records(text).is_err());
    }
}
