//! Reading and writing the delimited text formats.

use std::collections::HashMap;
use std::io::{Read, Write};

use anyhow::{anyhow, bail, Context, Result};
use sdr_core::simulation::SimOutcome;
use sdr_core::study::{Sign, SignStudy};

pub const STUDY_HEADER: [&str; 5] =
    ["param_id", "module_id", "proposed_sign", "validation_sign", "confidence_score"];
pub const SWEEP_HEADER: [&str; 5] =
    ["subset_size", "sdp", "ci_lower", "ci_upper", "simultaneous_upper"];
pub const OUTCOME_HEADER: [&str; 7] =
    ["method", "sigma", "k", "seed", "discoveries", "type_s_proportion", "target"];

/// 17 significant digits: enough to read back the same `f64`.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// A study together with the external ids of its parameters and modules.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyTable {
    pub param_ids: Vec<String>,
    /// Module names, indexed by the dense module ids used in `study`.
    pub module_names: Vec<String>,
    pub study: SignStudy,
}

fn parse_sign(field: &str, line: u64, column: &str) -> Result<Sign> {
    let v: i64 = match field.trim() {
        "+1" => 1,
        other => other
            .parse()
            .map_err(|_| anyhow!("line {line}: {column} must be -1 or +1, got {other:?}"))?,
    };
    Sign::try_from(v).map_err(|_| anyhow!("line {line}: {column} must be -1 or +1, got {v}"))
}

/// Parses a study table. Module ids are numbered by first appearance. The
/// score column may be absent or entirely empty, but not partly filled.
pub fn read_study<R: Read>(input: R) -> Result<StudyTable> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers().context("reading the header row")?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &str| col(name).ok_or_else(|| anyhow!("missing column {name:?}"));
    let (pid, mid, ps, vs) = (
        required("param_id")?,
        required("module_id")?,
        required("proposed_sign")?,
        required("validation_sign")?,
    );
    let sc = col("confidence_score");

    let mut param_ids = Vec::new();
    let mut seen: HashMap<String, u64> = HashMap::new();
    let mut module_names: Vec<String> = Vec::new();
    let mut module_index: HashMap<String, usize> = HashMap::new();
    let (mut proposed, mut validation, mut module_of) = (Vec::new(), Vec::new(), Vec::new());
    let mut scores: Vec<Option<f64>> = Vec::new();

    for (row, record) in reader.records().enumerate() {
        let line = row as u64 + 2;
        let record = record.with_context(|| format!("line {line}"))?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let id = field(pid).to_string();
        if id.is_empty() {
            bail!("line {line}: empty param_id");
        }
        if let Some(first) = seen.insert(id.clone(), line) {
            bail!("line {line}: duplicate param_id {id:?} (first on line {first})");
        }
        let module = field(mid).to_string();
        let next = module_names.len();
        let m = *module_index.entry(module.clone()).or_insert_with(|| {
            module_names.push(module);
            next
        });
        proposed.push(parse_sign(field(ps), line, "proposed_sign")?);
        validation.push(parse_sign(field(vs), line, "validation_sign")?);
        module_of.push(m);
        scores.push(match sc.map(field) {
            None | Some("") => None,
            Some(s) => Some(s.parse::<f64>().ok().filter(|x| !x.is_nan()).ok_or_else(|| {
                anyhow!("line {line}: confidence_score must be a number, got {s:?}")
            })?),
        });
        param_ids.push(id);
    }
    if param_ids.is_empty() {
        bail!("the study has no rows");
    }
    let scores = match scores.iter().filter(|s| s.is_some()).count() {
        0 => None,
        n if n == scores.len() => Some(scores.into_iter().flatten().collect()),
        _ => bail!("confidence_score is missing on some rows but not others"),
    };
    let study = SignStudy::new(proposed, validation, module_of, scores)?;
    Ok(StudyTable {
        param_ids,
        module_names,
        study,
    })
}

pub fn write_study<W: Write>(out: W, table: &StudyTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STUDY_HEADER)?;
    let s = &table.study;
    for i in 0..s.len() {
        let score = s.scores().map(|sc| fmt_real(sc[i])).unwrap_or_default();
        w.write_record([
            table.param_ids[i].as_str(),
            table.module_names[s.module_of()[i]].as_str(),
            &s.proposed()[i].to_string(),
            &s.validation()[i].to_string(),
            &score,
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub subset_size: usize,
    pub sdp: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub simultaneous_upper: Option<f64>,
}

pub fn write_sweep<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            r.subset_size.to_string(),
            fmt_real(r.sdp),
            fmt_real(r.ci_lower),
            fmt_real(r.ci_upper),
            r.simultaneous_upper.map(fmt_real).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_outcomes<W: Write>(out: W, rows: &[SimOutcome]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(OUTCOME_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.name().to_string(),
            fmt_real(r.sigma),
            fmt_real(r.k),
            r.seed.to_string(),
            r.discoveries.to_string(),
            fmt_real(r.type_s_proportion),
            fmt_real(r.target),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `param_id,<value>` rows with the given value column.
pub fn read_keyed<R: Read>(input: R, value_column: &str) -> Result<Vec<(String, String)>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    let pid = headers
        .iter()
        .position(|h| h == "param_id")
        .ok_or_else(|| anyhow!("missing column \"param_id\""))?;
    let val = headers
        .iter()
        .position(|h| h == value_column)
        .ok_or_else(|| anyhow!("missing column {value_column:?}"))?;
    let mut rows = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("line {}", row + 2))?;
        rows.push((
            record.get(pid).unwrap_or("").to_string(),
            record.get(val).unwrap_or("").to_string(),
        ));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
param_id,module_id,proposed_sign,validation_sign,confidence_score
g1,plateA,1,1,0.5
g2,plateA,-1,1,2.25
g3,plateB,+1,1,0.1
";

    #[test]
    fn parses_and_reindexes_modules() {
        let t = read_study(SAMPLE.as_bytes()).unwrap();
        assert_eq!(t.param_ids, vec!["g1", "g2", "g3"]);
        assert_eq!(t.module_names, vec!["plateA", "plateB"]);
        assert_eq!(t.study.module_of(), &[0, 0, 1]);
        assert_eq!(t.study.scores().unwrap(), &[0.5, 2.25, 0.1]);
        assert!(!t.study.agrees(1));
    }

    #[test]
    fn round_trip_is_exact() {
        let text = "param_id,module_id,proposed_sign,validation_sign,confidence_score\n\
                    a,m,1,-1,0.1\nb,n,-1,-1,0.30000000000000004\nc,m,1,1,1e-300\n";
        let t = read_study(text.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_study(&mut buf, &t).unwrap();
        assert_eq!(read_study(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn optional_score_column() {
        let t = read_study("param_id,module_id,proposed_sign,validation_sign\nx,0,1,1\n".as_bytes())
            .unwrap();
        assert!(t.study.scores().is_none());
        let partial = "param_id,module_id,proposed_sign,validation_sign,confidence_score\n\
                       x,0,1,1,0.3\ny,0,1,1,\n";
        assert!(read_study(partial.as_bytes()).is_err());
    }

    #[test]
    fn schema_violations() {
        let dup = "param_id,module_id,proposed_sign,validation_sign\nx,0,1,1\nx,0,1,1\n";
        assert!(read_study(dup.as_bytes()).unwrap_err().to_string().contains("duplicate"));
        let zero = "param_id,module_id,proposed_sign,validation_sign\nx,0,0,1\n";
        assert!(read_study(zero.as_bytes()).is_err());
        let missing = "param_id,proposed_sign,validation_sign\nx,1,1\n";
        assert!(read_study(missing.as_bytes()).is_err());
        assert!(read_study("param_id,module_id,proposed_sign,validation_sign\n".as_bytes()).is_err());
    }

    #[test]
    fn real_formatting() {
        assert_eq!(fmt_real(0.05), "5.0000000000000003e-2");
        assert_eq!(fmt_real(0.0), "0.0000000000000000e0");
        let x = 0.1 + 0.2;
        assert_eq!(fmt_real(x).parse::<f64>().unwrap(), x);
    }
}
