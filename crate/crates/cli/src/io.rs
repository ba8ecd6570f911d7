//! Dataset and artifact file formats.
//!
//! - `scheme.json`: `{"proper": [names...], "cs": name}`
//! - `tasks.jsonl`: `{"task_id", "group"?, "features"?, "true_q"?}`
//! - `responses.jsonl`: `{"task_id", "annotator_id"?, "answer": name or index}`
//! - `posteriors.jsonl`, `predictions.jsonl`: `{"task_id", "alpha", "n"}`
//! - `split.json`: `{"train", "val", "test"}` task id lists
//! - model file: a JSON header line followed by whitespace-separated matrices

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crowdprior_core::head::HeadModel;
use crowdprior_core::{CategoryScheme, DatasetSplit, DirichletParams, ResponseRecord, SoftLabel, TaskRecord};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Non-blank lines with their 1-based line numbers.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| CliError::parse(path, i + 1, e))?;
        out.push((i + 1, record));
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for record in records {
        serde_json::to_writer(&mut w, &record).map_err(|e| CliError::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct SchemeFile {
    proper: Vec<String>,
    cs: String,
}

pub fn read_scheme(path: &Path) -> Result<CategoryScheme> {
    let file: SchemeFile =
        serde_json::from_str(&read_text(path)?).map_err(|e| CliError::parse(path, e.line(), e))?;
    Ok(CategoryScheme::new(file.proper, file.cs)?)
}

pub fn write_scheme(path: &Path, scheme: &CategoryScheme) -> Result<()> {
    let file = SchemeFile {
        proper: scheme.proper_names().to_vec(),
        cs: scheme.cs_name().to_owned(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("scheme serializes");
    text.push('\n');
    write_text(path, &text)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TaskLine {
    pub task_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_q: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Answer {
    Index(usize),
    Name(String),
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResponseLine {
    pub task_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator_id: Option<String>,
    pub answer: Answer,
}

/// Reads tasks and, if given, attaches responses in file order.
pub fn read_dataset(scheme: &CategoryScheme, tasks: &Path, responses: Option<&Path>) -> Result<Vec<TaskRecord>> {
    let mut records = Vec::new();
    let mut index = HashMap::new();
    let mut feature_dim = None;
    for (line, t) in read_jsonl::<TaskLine>(tasks)? {
        if index.insert(t.task_id.clone(), records.len()).is_some() {
            return Err(CliError::parse(tasks, line, format!("duplicate task id {:?}", t.task_id)));
        }
        if let Some(f) = &t.features {
            if *feature_dim.get_or_insert(f.len()) != f.len() {
                return Err(CliError::parse(tasks, line, "feature dimension differs from earlier tasks"));
            }
        }
        let true_q = match t.true_q {
            Some(q) if q.len() != scheme.len() => {
                return Err(CliError::parse(
                    tasks,
                    line,
                    format!("true_q has {} entries, scheme has {}", q.len(), scheme.len()),
                ));
            }
            Some(q) => Some(SoftLabel::new(q).map_err(|e| CliError::parse(tasks, line, e))?),
            None => None,
        };
        let mut record = TaskRecord::new(t.task_id);
        record.group = t.group;
        record.features = t.features;
        record.true_q = true_q;
        records.push(record);
    }
    if let Some(path) = responses {
        for (line, r) in read_jsonl::<ResponseLine>(path)? {
            let Some(&i) = index.get(&r.task_id) else {
                return Err(CliError::parse(path, line, format!("unknown task id {:?}", r.task_id)));
            };
            let answer = match r.answer {
                Answer::Index(k) if k < scheme.len() => k,
                Answer::Index(k) => {
                    return Err(CliError::parse(
                        path,
                        line,
                        format!("answer {k} outside {} categories", scheme.len()),
                    ));
                }
                Answer::Name(name) => scheme
                    .index_of(&name)
                    .ok_or_else(|| CliError::parse(path, line, format!("unknown category {name:?}")))?,
            };
            let mut record = ResponseRecord::new(r.task_id, answer);
            record.annotator_id = r.annotator_id;
            records[i].responses.push(record);
        }
    }
    Ok(records)
}

pub fn write_tasks(path: &Path, tasks: &[TaskRecord]) -> Result<()> {
    write_jsonl(
        path,
        tasks.iter().map(|t| TaskLine {
            task_id: t.task_id.clone(),
            group: t.group.clone(),
            features: t.features.clone(),
            true_q: t.true_q.as_ref().map(|q| q.as_slice().to_vec()),
        }),
    )
}

pub fn write_responses(path: &Path, scheme: &CategoryScheme, tasks: &[TaskRecord]) -> Result<()> {
    write_jsonl(
        path,
        tasks.iter().flat_map(|t| &t.responses).map(|r| ResponseLine {
            task_id: r.task_id.clone(),
            annotator_id: r.annotator_id.clone(),
            answer: Answer::Name(scheme.name(r.answer).expect("answer within scheme").to_owned()),
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsLine {
    pub task_id: String,
    pub alpha: Vec<f64>,
    pub n: u64,
}

/// Dirichlet parameters keyed by task id.
pub fn read_params(path: &Path, categories: usize) -> Result<HashMap<String, DirichletParams>> {
    let mut out = HashMap::new();
    for (line, p) in read_jsonl::<ParamsLine>(path)? {
        if p.alpha.len() != categories {
            return Err(CliError::parse(
                path,
                line,
                format!("alpha has {} entries, scheme has {categories}", p.alpha.len()),
            ));
        }
        let alpha = DirichletParams::new(p.alpha).map_err(|e| CliError::parse(path, line, e))?;
        if out.insert(p.task_id.clone(), alpha).is_some() {
            return Err(CliError::parse(path, line, format!("duplicate task id {:?}", p.task_id)));
        }
    }
    Ok(out)
}

pub fn read_split(path: &Path) -> Result<DatasetSplit> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::parse(path, e.line(), e))
}

pub fn write_split(path: &Path, split: &DatasetSplit) -> Result<()> {
    let mut text = serde_json::to_string_pretty(split).expect("split serializes");
    text.push('\n');
    write_text(path, &text)
}

pub const MODEL_FORMAT: &str = "crowdprior-head";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[allow(non_snake_case)]
struct ModelHeader {
    format: String,
    version: u32,
    d: usize,
    C: usize,
    alpha0_sum: f64,
}

fn push_matrix(out: &mut String, name: &str, values: &[f64], cols: usize) {
    out.push_str(name);
    out.push('\n');
    for row in values.chunks(cols) {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
}

/// Plain-text dump; floats are written in shortest round-trip form.
pub fn write_model(path: &Path, model: &HeadModel) -> Result<()> {
    let k = model.categories();
    let header = ModelHeader {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        d: model.feature_dim(),
        C: k - 1,
        alpha0_sum: model.alpha0_sum(),
    };
    let mut text = serde_json::to_string(&header).expect("header serializes");
    text.push('\n');
    push_matrix(&mut text, "score_weights", &model.score_weights, k);
    push_matrix(&mut text, "score_bias", &model.score_bias, k);
    push_matrix(&mut text, "mix", &model.mix, k);
    write_text(path, &text)
}

pub fn read_model(path: &Path) -> Result<HeadModel> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| CliError::parse(path, 1, "empty model file"))?;
    let header: ModelHeader = serde_json::from_str(first).map_err(|e| CliError::parse(path, 1, e))?;
    if header.format != MODEL_FORMAT || header.version != MODEL_VERSION {
        return Err(CliError::parse(
            path,
            1,
            format!("unsupported model format {} v{}", header.format, header.version),
        ));
    }
    let k = header.C + 1;
    let mut sections: HashMap<String, Vec<f64>> = HashMap::new();
    let mut current: Option<String> = None;
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.chars().next().is_some_and(char::is_alphabetic) {
            sections.insert(line.to_owned(), Vec::new());
            current = Some(line.to_owned());
            continue;
        }
        let name = current.as_ref().ok_or_else(|| CliError::parse(path, i + 1, "values before a section name"))?;
        let row = sections.get_mut(name).expect("section exists");
        for cell in line.split_whitespace() {
            row.push(cell.parse().map_err(|e| CliError::parse(path, i + 1, e))?);
        }
    }
    let mut take = |name: &str| {
        sections
            .remove(name)
            .ok_or_else(|| CliError::parse(path, 0, format!("missing section {name}")))
    };
    let (weights, bias, mix) = (take("score_weights")?, take("score_bias")?, take("mix")?);
    HeadModel::from_parts(header.d, k, weights, bias, mix, header.alpha0_sum)
        .map_err(|e| CliError::parse(path, 0, e))
}
