//! Line-oriented corpus, tree, triple and generation files, and the
//! checkpoint directory layout.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::ParsedPair;
use crate::evaluation::EvalTriple;
use crate::model::{LabelVocab, Lexicon, Model, ModelConfig, ModelError};
use crate::tensor::{read_arrays, write_arrays, CheckpointError, ParamStore, Scalar};
use crate::text::{BpeModel, TextError, Vocab};
use crate::training::PairRecord;
use crate::tree::{ConstituencyTree, TreeError};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{what} line {line}: {reason}")]
    Format {
        what: String,
        line: usize,
        reason: String,
    },
    #[error("{what} line {line} column {column}: {source}")]
    Tree {
        what: String,
        line: usize,
        column: usize,
        source: TreeError,
    },
    #[error("{0}")]
    Mismatch(String),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub fn read_text(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), DataError> {
    fs::write(path, text).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn format_err(what: &str, line: usize, reason: impl Into<String>) -> DataError {
    DataError::Format {
        what: what.to_string(),
        line,
        reason: reason.into(),
    }
}

/// Splits each non-empty line into exactly `columns` tab-separated fields.
pub fn parse_columns(text: &str, columns: usize, what: &str) -> Result<Vec<Vec<String>>, DataError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split('\t').map(|f| f.trim().to_string()).collect();
        if fields.len() != columns {
            return Err(format_err(what, i + 1, format!("expected {columns} tab-separated fields, found {}", fields.len())));
        }
        if let Some(k) = fields.iter().position(String::is_empty) {
            return Err(format_err(what, i + 1, format!("field {} is empty", k + 1)));
        }
        rows.push(fields);
    }
    Ok(rows)
}

/// Parses a tree file with `columns` trees per line.
pub fn parse_tree_rows(text: &str, columns: usize, what: &str) -> Result<Vec<Vec<ConstituencyTree>>, DataError> {
    let rows = parse_columns(text, columns, what)?;
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(c, s)| {
                    ConstituencyTree::parse_bracketed(s).map_err(|source| DataError::Tree {
                        what: what.to_string(),
                        line: i + 1,
                        column: c + 1,
                        source,
                    })
                })
                .collect()
        })
        .collect()
}

fn check_aligned(sentences: usize, trees: usize, what: &str) -> Result<(), DataError> {
    if trees < sentences {
        return Err(format_err(what, trees + 1, "missing tree line"));
    }
    if trees > sentences {
        return Err(DataError::Mismatch(format!(
            "{what} has {trees} lines but the sentence file has {sentences}"
        )));
    }
    Ok(())
}

/// Pairs with the parse of both sides.
pub fn parse_parsed_pairs(pairs: &str, trees: &str) -> Result<Vec<ParsedPair>, DataError> {
    let rows = parse_columns(pairs, 2, "pairs")?;
    let tree_rows = parse_tree_rows(trees, 2, "trees")?;
    check_aligned(rows.len(), tree_rows.len(), "trees")?;
    Ok(rows
        .into_iter()
        .zip(tree_rows)
        .map(|(mut r, mut t)| ParsedPair {
            target: r.pop().expect("two fields"),
            source: r.pop().expect("two fields"),
            target_tree: t.pop().expect("two trees"),
            source_tree: t.pop().expect("two trees"),
        })
        .collect())
}

pub fn to_training_pairs(pairs: &[ParsedPair]) -> Vec<PairRecord> {
    pairs
        .iter()
        .map(|p| PairRecord {
            source: p.source.clone(),
            target: p.target.clone(),
            tree: p.target_tree.clone(),
        })
        .collect()
}

pub fn parse_triples(triples: &str, trees: &str) -> Result<Vec<EvalTriple>, DataError> {
    let rows = parse_columns(triples, 3, "triples")?;
    let tree_rows = parse_tree_rows(trees, 3, "trees")?;
    check_aligned(rows.len(), tree_rows.len(), "trees")?;
    Ok(rows
        .into_iter()
        .zip(tree_rows)
        .map(|(r, t)| {
            let [source, exemplar, reference]: [String; 3] = r.try_into().expect("three fields");
            let [source_tree, exemplar_tree, reference_tree]: [ConstituencyTree; 3] =
                t.try_into().expect("three trees");
            EvalTriple {
                source,
                exemplar,
                reference,
                source_tree,
                exemplar_tree,
                reference_tree,
            }
        })
        .collect())
}

pub fn format_triples(triples: &[EvalTriple]) -> (String, String) {
    let mut text = String::new();
    let mut trees = String::new();
    for t in triples {
        text.push_str(&format!("{}\t{}\t{}\n", t.source, t.exemplar, t.reference));
        trees.push_str(&format!(
            "{}\t{}\t{}\n",
            t.source_tree.to_bracketed(),
            t.exemplar_tree.to_bracketed(),
            t.reference_tree.to_bracketed()
        ));
    }
    (text, trees)
}

/// One line of a generation file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationRecord {
    pub source: String,
    pub exemplar: String,
    pub height: usize,
    pub generation: String,
}

pub fn format_generations(records: &[GenerationRecord]) -> String {
    records
        .iter()
        .map(|r| format!("{}\t{}\t{}\t{}\n", r.source, r.exemplar, r.height, r.generation))
        .collect()
}

/// Reads a generation file. Empty generations are allowed.
pub fn parse_generations(text: &str) -> Result<Vec<GenerationRecord>, DataError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(format_err("generations", i + 1, "expected 4 tab-separated fields"));
        }
        let height = fields[2]
            .trim()
            .parse()
            .map_err(|_| format_err("generations", i + 1, "height is not an integer"))?;
        out.push(GenerationRecord {
            source: fields[0].trim().to_string(),
            exemplar: fields[1].trim().to_string(),
            height,
            generation: fields[3].trim().to_string(),
        });
    }
    Ok(out)
}

/// Architecture record stored next to the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub model: ModelConfig,
    pub precision: String,
    pub decoder_input: String,
    pub labels: Vec<String>,
}

pub const PARAMS_FILE: &str = "params.bin";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const BPE_FILE: &str = "bpe.txt";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const LABELS_FILE: &str = "labels.txt";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn save_lexicon(dir: &Path, lexicon: &Lexicon) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_text(&dir.join(BPE_FILE), &lexicon.bpe.to_text())?;
    write_text(&dir.join(VOCAB_FILE), &lexicon.vocab.to_text())?;
    write_text(&dir.join(LABELS_FILE), &lexicon.labels.to_text())
}

pub fn load_lexicon(dir: &Path) -> Result<Lexicon, DataError> {
    Ok(Lexicon {
        bpe: BpeModel::from_text(&read_text(&dir.join(BPE_FILE))?)?,
        vocab: Vocab::from_text(&read_text(&dir.join(VOCAB_FILE))?)?,
        labels: LabelVocab::from_text(&read_text(&dir.join(LABELS_FILE))?),
    })
}

pub fn params_bytes<T: Scalar>(params: &ParamStore<T>) -> Vec<u8> {
    let entries: Vec<_> = params.iter().collect();
    let mut buf = Vec::new();
    write_arrays(&mut buf, &entries).expect("writing to memory cannot fail");
    buf
}

/// Writes parameters, manifest and lexicon into `dir`.
pub fn save_checkpoint<T: Scalar>(
    dir: &Path,
    config: &ModelConfig,
    params: &ParamStore<T>,
    lexicon: &Lexicon,
) -> Result<(), DataError> {
    save_lexicon(dir, lexicon)?;
    write_text_bytes(&dir.join(PARAMS_FILE), &params_bytes(params))?;
    let manifest = Manifest {
        model: config.clone(),
        precision: format!("{:?}", T::DTYPE).to_lowercase(),
        decoder_input: "context,syntax,embedding".into(),
        labels: lexicon.labels.labels().to_vec(),
    };
    write_text(
        &dir.join(MANIFEST_FILE),
        &toml::to_string(&manifest).expect("manifest serializes"),
    )
}

fn write_text_bytes(path: &Path, bytes: &[u8]) -> Result<(), DataError> {
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn load_checkpoint<T: Scalar>(dir: &Path) -> Result<(Model<T>, Lexicon), DataError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest: Manifest = toml::from_str(&read_text(&manifest_path)?)
        .map_err(|e| format_err("manifest", 1, e.message().to_string()))?;
    let lexicon = load_lexicon(dir)?;
    if lexicon.labels.labels() != manifest.labels.as_slice() {
        return Err(DataError::Mismatch("label file disagrees with manifest".into()));
    }
    let params_path = dir.join(PARAMS_FILE);
    let bytes = fs::read(&params_path).map_err(io_err(&params_path))?;
    let mut store = ParamStore::new();
    for (name, tensor) in read_arrays::<T, _>(&bytes[..])? {
        store.insert(&name, tensor);
    }
    let model = Model::from_params(manifest.model, store)?;
    Ok((model, lexicon))
}
