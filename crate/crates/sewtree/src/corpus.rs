//! Loading corpora, specs, grammars, and reference texts from disk.
//!
//! Each loader accepts either a single file or a directory, in which case
//! every file with the right extension is read in file-name order.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use sewtree_core::extract::{InstructionDoc, PatternSpec};
use sewtree_core::grammar::GoldGrammar;

use crate::error::{Error, Result};
use crate::formats::{read_docs, read_grammar, read_spec};

fn files_with_ext(path: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(path).map_err(|e| Error::io(path, e))? {
        let p = entry.map_err(|e| Error::io(path, e))?.path();
        if p.is_file() && p.extension().is_some_and(|x| x == ext) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Documents sorted by doc id. Duplicate ids are an error.
pub fn load_docs(path: &Path) -> Result<Vec<InstructionDoc>> {
    let mut by_id: BTreeMap<String, InstructionDoc> = BTreeMap::new();
    for f in files_with_ext(path, "json")? {
        for d in read_docs(&f)? {
            if by_id.contains_key(&d.doc_id) {
                return Err(Error::Config(format!("{}: duplicate doc_id {:?}", f.display(), d.doc_id)));
            }
            by_id.insert(d.doc_id.clone(), d);
        }
    }
    Ok(by_id.into_values().collect())
}

fn keyed<T>(
    path: &Path,
    ext: &str,
    what: &str,
    mut read: impl FnMut(&Path) -> Result<Vec<T>>,
    key: impl Fn(&T) -> &str,
) -> Result<BTreeMap<String, T>> {
    let mut out = BTreeMap::new();
    for f in files_with_ext(path, ext)? {
        for item in read(&f)? {
            let k = key(&item).to_string();
            if out.contains_key(&k) {
                return Err(Error::Config(format!("{}: second {what} for pattern {k:?}", f.display())));
            }
            out.insert(k, item);
        }
    }
    Ok(out)
}

pub fn load_specs(path: &Path) -> Result<BTreeMap<String, PatternSpec>> {
    keyed(path, "json", "spec", |f| read_spec(f).map(|s| vec![s]), |s| s.pattern_id())
}

pub fn load_grammars(path: &Path) -> Result<BTreeMap<String, GoldGrammar>> {
    keyed(path, "cfg", "grammar", |f| read_grammar(f).map(|g| vec![g]), |g| g.pattern_id())
}

/// Reference instruction texts keyed by pattern id, steps joined by newlines.
pub fn load_references(path: &Path) -> Result<BTreeMap<String, String>> {
    let docs = keyed(path, "json", "reference", read_docs, |d| d.pattern_id.as_str())?;
    Ok(docs.into_iter().map(|(k, d)| (k, d.steps.join("\n"))).collect())
}
