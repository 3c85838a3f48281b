use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Curriculum, CurriculumEntry};
use crate::expr::{parse, render};
use crate::problem::{Problem, Rule};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemRecord {
    pub id: String,
    pub problem: String,
    pub answer: String,
    pub depth: usize,
    pub level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumRecord {
    pub id: String,
    pub problem: String,
    pub answer: String,
    pub depth: usize,
    pub level: usize,
    pub multiplicity: u64,
    pub parents: Vec<String>,
    pub rule: Option<Rule>,
    pub order: usize,
}

impl From<&Problem> for ProblemRecord {
    fn from(p: &Problem) -> Self {
        ProblemRecord {
            id: p.id.clone(),
            problem: render(&p.expr),
            answer: render(&p.solution),
            depth: p.depth,
            level: p.level,
        }
    }
}

impl ProblemRecord {
    /// Rebuilds the problem, rejecting records whose cached fields disagree
    /// with the expression.
    pub fn to_problem(&self, line: usize) -> Result<Problem, DatasetError> {
        let schema = |message: String| DatasetError::Schema { line, message };
        let expr = parse(&self.problem).map_err(|e| schema(format!("problem: {e}")))?;
        let p = Problem::new(self.id.clone(), expr);
        if p.depth != self.depth || p.level != self.level {
            return Err(schema(format!(
                "depth/level {}/{} do not match expression (expected {}/{})",
                self.depth, self.level, p.depth, p.level
            )));
        }
        let answer = parse(&self.answer).map_err(|e| schema(format!("answer: {e}")))?;
        if answer != p.solution {
            return Err(schema(format!("answer `{}` is not d/dx of the problem", self.answer)));
        }
        Ok(p)
    }
}

fn to_lines<T: Serialize>(records: impl Iterator<Item = T>) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(&r).expect("records serialize"));
        out.push('\n');
    }
    out
}

fn from_lines<T: DeserializeOwned>(text: &str) -> Result<Vec<(usize, T)>, DatasetError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|r| (i + 1, r))
                .map_err(|source| DatasetError::Json { line: i + 1, source })
        })
        .collect()
}

pub fn export_problems(problems: &[Problem]) -> String {
    to_lines(problems.iter().map(ProblemRecord::from))
}

pub fn import_problems(text: &str) -> Result<Vec<Problem>, DatasetError> {
    from_lines::<ProblemRecord>(text)?.into_iter().map(|(line, r)| r.to_problem(line)).collect()
}

pub fn export_curriculum(c: &Curriculum) -> String {
    to_lines(c.entries.iter().map(|e| {
        let base = ProblemRecord::from(&e.problem);
        CurriculumRecord {
            id: base.id,
            problem: base.problem,
            answer: base.answer,
            depth: base.depth,
            level: base.level,
            multiplicity: e.multiplicity,
            parents: e.parents.clone(),
            rule: e.rule,
            order: e.order,
        }
    }))
}

pub fn import_curriculum(text: &str) -> Result<Curriculum, DatasetError> {
    let records = from_lines::<CurriculumRecord>(text)?;
    let mut entries = Vec::with_capacity(records.len());
    for (i, (line, r)) in records.into_iter().enumerate() {
        if r.order != i {
            return Err(DatasetError::Schema {
                line,
                message: format!("order {} out of sequence (expected {i})", r.order),
            });
        }
        let base = ProblemRecord {
            id: r.id,
            problem: r.problem,
            answer: r.answer,
            depth: r.depth,
            level: r.level,
        };
        entries.push(CurriculumEntry {
            order: r.order,
            problem: base.to_problem(line)?,
            multiplicity: r.multiplicity,
            parents: r.parents,
            rule: r.rule,
        });
    }
    Ok(Curriculum { entries })
}

/// Writes `bytes` to a temporary file beside `path`, then renames it into
/// place so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    let io = |source| DatasetError::Io { path: path.to_path_buf(), source };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn read(path: &Path) -> Result<String, DatasetError> {
    fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })
}

pub fn write_problems(path: &Path, problems: &[Problem]) -> Result<(), DatasetError> {
    write_atomic(path, export_problems(problems).as_bytes())
}

pub fn read_problems(path: &Path) -> Result<Vec<Problem>, DatasetError> {
    import_problems(&read(path)?)
}

pub fn write_curriculum(path: &Path, c: &Curriculum) -> Result<(), DatasetError> {
    write_atomic(path, export_curriculum(c).as_bytes())
}

pub fn read_curriculum(path: &Path) -> Result<Curriculum, DatasetError> {
    import_curriculum(&read(path)?)
}
