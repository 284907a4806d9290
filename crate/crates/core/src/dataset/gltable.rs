use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlycemicEntry {
    /// Lower-cased food name pattern.
    pub pattern: String,
    pub gi: f64,
    /// Available carbohydrate per 100 g of food.
    pub cho_per_100g: f64,
}

/// Glycemic-index reference table with longest-substring lookup.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GlycemicTable {
    entries: Vec<GlycemicEntry>,
}

impl GlycemicTable {
    pub fn new(entries: Vec<GlycemicEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(entries.len());
        for mut e in entries {
            e.pattern = e.pattern.trim().to_lowercase();
            if e.pattern.is_empty() {
                return Err(Error::Schema("empty food pattern".into()));
            }
            if !(e.gi >= 0.0 && e.gi <= 150.0) {
                return Err(Error::Range(format!("gi {} for {:?} outside [0, 150]", e.gi, e.pattern)));
            }
            if !(e.cho_per_100g >= 0.0 && e.cho_per_100g <= 100.0) {
                return Err(Error::Range(format!(
                    "cho_per_100g {} for {:?} outside [0, 100]",
                    e.cho_per_100g, e.pattern
                )));
            }
            if !seen.insert(e.pattern.clone()) {
                return Err(Error::Uniqueness(e.pattern));
            }
            out.push(e);
        }
        Ok(GlycemicTable { entries: out })
    }

    pub fn entries(&self) -> &[GlycemicEntry] {
        &self.entries
    }

    /// The longest pattern contained in `description` (case-insensitive);
    /// equal-length matches resolve to the earlier table row.
    pub fn lookup(&self, description: &str) -> Option<&GlycemicEntry> {
        let desc = description.to_lowercase();
        let mut best: Option<&GlycemicEntry> = None;
        for e in &self.entries {
            if desc.contains(&e.pattern) && best.is_none_or(|b| e.pattern.len() > b.pattern.len()) {
                best = Some(e);
            }
        }
        best
    }
}

pub fn load_gl_table(path: impl AsRef<Path>) -> Result<GlycemicTable> {
    let bytes = super::read_file(path.as_ref())?;
    parse_gl_table(&bytes)
}

#[derive(Deserialize)]
struct Row {
    pattern: String,
    gi: f64,
    cho_per_100g: f64,
}

pub fn parse_gl_table(bytes: &[u8]) -> Result<GlycemicTable> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let header = reader.headers()?.clone();
    for h in header.iter() {
        if !matches!(h, "pattern" | "gi" | "cho_per_100g") {
            return Err(Error::Schema(format!("unknown column {h}")));
        }
    }
    let mut entries = Vec::new();
    for row in reader.deserialize::<Row>() {
        let r = row?;
        entries.push(GlycemicEntry {
            pattern: r.pattern,
            gi: r.gi,
            cho_per_100g: r.cho_per_100g,
        });
    }
    GlycemicTable::new(entries)
}

pub fn write_gl_table<W: Write>(table: &GlycemicTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["pattern", "gi", "cho_per_100g"])?;
    for e in &table.entries {
        w.write_record([e.pattern.clone(), e.gi.to_string(), e.cho_per_100g.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<gl table writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substring_longest_match() {
        let t = parse_gl_table(b"pattern,gi,cho_per_100g\nrice,73,28\npork and rice dish,60,23\n").unwrap();
        assert_eq!(t.lookup("fried rice").unwrap().pattern, "rice");
        let hit = t.lookup("Pork and rice dish").unwrap();
        assert_eq!((hit.gi, hit.cho_per_100g), (60.0, 23.0));
        assert!(t.lookup("apple").is_none());
    }

    #[test]
    fn duplicate_pattern_rejected() {
        let err = parse_gl_table(b"pattern,gi,cho_per_100g\nrice,73,28\nRice,70,27\n").unwrap_err();
        assert!(matches!(err, Error::Uniqueness(p) if p == "rice"));
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(matches!(
            parse_gl_table(b"pattern,gi,cho_per_100g\nrice,-1,28\n"),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            parse_gl_table(b"pattern,gi,cho_per_100g\nrice,70,101\n"),
            Err(Error::Range(_))
        ));
    }
}
