//! CSV readers and writers for trajectories, segments and embeddings.
//!
//! Readers skip blank lines and lines starting with `#`, so files may carry
//! a metadata header. Floats are written in shortest round-trip form.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mds::Embedding;
use crate::segmentation::Segmentation;
use crate::trajectory::{Interaction, Point};

pub const ENCOUNTER_HEADER: &str = "encounter_id,t,x1,y1,x2,y2";
pub const SEGMENT_HEADER: &str = "encounter_id,segment_index,t,x1,y1,x2,y2";

/// Interactions with their identifiers, in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub interactions: Vec<Interaction>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Identifier of a segment read back from a segmented file.
pub fn segment_id(encounter_id: &str, index: usize) -> String {
    format!("{encounter_id}/{index}")
}

struct Rows {
    line: usize,
    grid: Vec<f64>,
    first: Vec<Point>,
    second: Vec<Point>,
}

/// Reads an encounter file or a segmented file, chosen by the header.
///
/// Rows of one interaction must be contiguous with increasing time stamps.
/// Segments are identified as `encounter/index`.
pub fn read_interactions<R: BufRead>(input: R) -> Result<Dataset> {
    let mut header: Option<bool> = None;
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Rows> = HashMap::new();
    for (idx, line) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let Some(segmented) = header else {
            header = Some(match line.replace(' ', "").as_str() {
                ENCOUNTER_HEADER => false,
                SEGMENT_HEADER => true,
                _ => {
                    return Err(Error::parse(
                        lineno,
                        format!("expected header `{ENCOUNTER_HEADER}` or `{SEGMENT_HEADER}`"),
                    ))
                }
            });
            continue;
        };
        let width = if segmented { 7 } else { 6 };
        if fields.len() != width {
            return Err(Error::parse(lineno, format!("expected {width} fields, got {}", fields.len())));
        }
        let id = if segmented {
            let index: usize = fields[1]
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad segment index `{}`", fields[1])))?;
            segment_id(fields[0], index)
        } else {
            fields[0].to_string()
        };
        if id.is_empty() {
            return Err(Error::parse(lineno, "empty identifier"));
        }
        let values: Vec<f64> = fields[width - 5..]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(lineno, format!("bad number `{f}`")))
            })
            .collect::<Result<_>>()?;
        if order.last() != Some(&id) {
            if groups.contains_key(&id) {
                return Err(Error::parse(lineno, format!("rows of `{id}` are not contiguous")));
            }
            order.push(id.clone());
            groups.insert(
                id.clone(),
                Rows {
                    line: lineno,
                    grid: Vec::new(),
                    first: Vec::new(),
                    second: Vec::new(),
                },
            );
        }
        let rows = groups.get_mut(&id).expect("group was just inserted");
        if rows.grid.last().is_some_and(|&t| values[0] <= t) {
            return Err(Error::parse(lineno, format!("time stamps of `{id}` must increase")));
        }
        rows.grid.push(values[0]);
        rows.first.push([values[1], values[2]]);
        rows.second.push([values[3], values[4]]);
    }
    if header.is_none() {
        return Err(Error::parse(1, "missing header"));
    }
    let mut data = Dataset::default();
    for id in order {
        let rows = groups.remove(&id).expect("every ordered id has rows");
        let inter = Interaction::from_parts(rows.grid, rows.first, rows.second)
            .map_err(|e| Error::parse(rows.line, format!("`{id}`: {e}")))?;
        data.ids.push(id);
        data.interactions.push(inter);
    }
    Ok(data)
}

fn write_rows<W: Write>(out: &mut W, prefix: &str, inter: &Interaction) -> Result<()> {
    let (a, b) = (inter.first().samples(), inter.second().samples());
    for (i, t) in inter.grid().iter().enumerate() {
        writeln!(
            out,
            "{prefix},{t:?},{:?},{:?},{:?},{:?}",
            a[i][0], a[i][1], b[i][0], b[i][1]
        )?;
    }
    Ok(())
}

pub fn write_interactions<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    writeln!(out, "{ENCOUNTER_HEADER}")?;
    for (id, inter) in data.ids.iter().zip(&data.interactions) {
        write_rows(&mut out, id, inter)?;
    }
    Ok(())
}

/// One segment's provenance in a segmented file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentEntry {
    pub encounter_id: String,
    pub segment_index: usize,
    /// Inclusive raw-index span in the source encounter.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncounterEntry {
    pub encounter_id: String,
    pub epsilon: f64,
    pub change_points: Vec<usize>,
}

/// Sidecar describing how encounters were cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentManifest {
    pub grid_len: usize,
    pub encounters: Vec<EncounterEntry>,
    pub segments: Vec<SegmentEntry>,
}

impl SegmentManifest {
    pub fn from_segmentations(results: &[Segmentation], grid_len: usize) -> Self {
        Self {
            grid_len,
            encounters: results
                .iter()
                .map(|s| EncounterEntry {
                    encounter_id: s.encounter_id.clone(),
                    epsilon: s.epsilon,
                    change_points: s.knots.points.clone(),
                })
                .collect(),
            segments: results
                .iter()
                .flat_map(|s| {
                    s.spans.iter().enumerate().map(|(i, &(start, end))| SegmentEntry {
                        encounter_id: s.encounter_id.clone(),
                        segment_index: i,
                        start,
                        end,
                    })
                })
                .collect(),
        }
    }
}

pub fn write_segments<W: Write>(results: &[Segmentation], mut out: W) -> Result<()> {
    writeln!(out, "{SEGMENT_HEADER}")?;
    for s in results {
        for (i, seg) in s.segments.iter().enumerate() {
            write_rows(&mut out, &format!("{},{i}", s.encounter_id), seg)?;
        }
    }
    Ok(())
}

/// Rows `id,coord_1,...,coord_beta`.
pub fn write_embedding<W: Write>(ids: &[String], embedding: &Embedding, mut out: W) -> Result<()> {
    if ids.len() != embedding.n() {
        return Err(Error::invalid("ids and embedding differ in length"));
    }
    let cols: Vec<String> = (1..=embedding.beta).map(|c| format!("coord_{c}")).collect();
    writeln!(out, "id,{}", cols.join(","))?;
    for (id, p) in ids.iter().zip(&embedding.points) {
        let row: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{id},{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "# {\"note\":1}\nencounter_id,t,x1,y1,x2,y2\na,0,0,0,1,1\na,1,1,0,2,1\nb,0,5,5,6,6\nb,0.5,5,6,6,7\n";

    #[test]
    fn reads_groups_in_order() {
        let data = read_interactions(SAMPLE.as_bytes()).unwrap();
        assert_eq!(data.ids, ["a", "b"]);
        assert_eq!(data.interactions[1].grid(), &[0.0, 0.5]);
        assert_eq!(data.interactions[0].second().samples()[1], [2.0, 1.0]);
    }

    #[test]
    fn round_trip() {
        let data = read_interactions(SAMPLE.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_interactions(&data, &mut buf).unwrap();
        assert_eq!(read_interactions(&buf[..]).unwrap(), data);
    }

    fn parse_line(text: &str) -> usize {
        match read_interactions(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(parse_line("id,t\n"), 1);
        assert_eq!(parse_line("encounter_id,t,x1,y1,x2,y2\na,0,0,0,1\n"), 2);
        assert_eq!(parse_line("encounter_id,t,x1,y1,x2,y2\na,0,0,0,1,1\na,0,1,0,1,nan\n"), 3);
        assert_eq!(parse_line("encounter_id,t,x1,y1,x2,y2\na,0,0,0,1,1\na,0,1,0,1,1\n"), 3);
        assert_eq!(
            parse_line("encounter_id,t,x1,y1,x2,y2\na,0,0,0,1,1\na,1,0,0,1,1\nb,0,0,0,1,1\nb,1,0,0,1,1\na,2,0,0,1,1\n"),
            6
        );
        assert_eq!(parse_line("encounter_id,t,x1,y1,x2,y2\na,0,0,0,1,1\n"), 2);
    }

    #[test]
    fn segmented_ids() {
        let text = "encounter_id,segment_index,t,x1,y1,x2,y2\ne,0,0,0,0,1,1\ne,0,1,1,0,2,1\ne,1,0,0,0,1,1\ne,1,1,1,1,1,1\n";
        let data = read_interactions(text.as_bytes()).unwrap();
        assert_eq!(data.ids, ["e/0", "e/1"]);
    }
}
