//! Item catalog ingestion and aspect indexing.
//!
//! The catalog file is a CSV with a required `id` column, optional `text:<name>`
//! columns (concatenated into the item's free text) and optional `aspect:<name>`
//! columns holding categorical value tokens. An empty cell is a missing value.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};

/// One catalog entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Item {
    /// Opaque identifier, unique within a catalog.
    pub id: String,
    /// Concatenated descriptive text, used only for relevance scoring.
    pub text: String,
    /// Aspect name to value token. An absent key is a missing value; tokens
    /// are compared by exact equality, never fuzzily.
    pub aspects: BTreeMap<String, String>,
}

/// Drops items whose `aspect` equals `value` (compared after folding).
#[derive(Debug, Clone)]
pub struct AspectFilter {
    pub aspect: String,
    pub value: String,
}

/// Options for [`load_catalog`].
#[derive(Debug, Clone)]
pub struct IngestConfig {
    /// Items with fewer present aspect values than this are dropped.
    pub min_aspects: usize,
    /// User-supplied category filters, applied after folding.
    pub exclude: Vec<AspectFilter>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self { min_aspects: 1, exclude: Vec::new() }
    }
}

/// Row counts reported by [`load_catalog`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestStats {
    pub read: usize,
    pub kept: usize,
    pub dropped: usize,
}

/// An immutable item collection with an indexed aspect layout.
///
/// `aspect_names` is exactly the union of aspect keys appearing in items, in
/// first-seen order. Per aspect, every distinct value token gets a dense id so
/// that equality tests reduce to integer comparison.
#[derive(Debug, Clone)]
pub struct Catalog {
    items: Vec<Item>,
    aspect_names: Vec<String>,
    aspect_index: HashMap<String, usize>,
    /// Aspect-major: `value_ids[p][i]` is item i's value id for aspect p.
    value_ids: Vec<Vec<Option<u32>>>,
    /// Per-aspect value vocabulary, in first-seen order.
    value_tokens: Vec<Vec<String>>,
}

impl Catalog {
    /// Builds a catalog from items, deriving the aspect vocabulary by scanning
    /// items in order. `aspect_order_hint` seeds the aspect ordering (extra
    /// names that no item uses are ignored).
    pub fn from_items_ordered(items: Vec<Item>, aspect_order_hint: &[String]) -> Result<Self> {
        let mut seen_ids: HashSet<&str> = HashSet::with_capacity(items.len());
        for item in &items {
            if !seen_ids.insert(item.id.as_str()) {
                return Err(Error::DuplicateId(item.id.clone()));
            }
        }

        let mut aspect_names: Vec<String> = Vec::new();
        let mut aspect_index: HashMap<String, usize> = HashMap::new();
        let used: HashSet<&str> = items
            .iter()
            .flat_map(|it| it.aspects.keys().map(String::as_str))
            .collect();
        for name in aspect_order_hint {
            if used.contains(name.as_str()) && !aspect_index.contains_key(name) {
                aspect_index.insert(name.clone(), aspect_names.len());
                aspect_names.push(name.clone());
            }
        }
        for item in &items {
            for name in item.aspects.keys() {
                if !aspect_index.contains_key(name) {
                    aspect_index.insert(name.clone(), aspect_names.len());
                    aspect_names.push(name.clone());
                }
            }
        }

        let mut value_ids = vec![vec![None; items.len()]; aspect_names.len()];
        let mut value_tokens: Vec<Vec<String>> = vec![Vec::new(); aspect_names.len()];
        let mut token_index: Vec<HashMap<String, u32>> = vec![HashMap::new(); aspect_names.len()];
        for (i, item) in items.iter().enumerate() {
            for (name, value) in &item.aspects {
                let p = aspect_index[name];
                let next = value_tokens[p].len() as u32;
                let id = *token_index[p].entry(value.clone()).or_insert_with(|| {
                    value_tokens[p].push(value.clone());
                    next
                });
                value_ids[p][i] = Some(id);
            }
        }

        Ok(Self { items, aspect_names, aspect_index, value_ids, value_tokens })
    }

    pub fn from_items(items: Vec<Item>) -> Result<Self> {
        Self::from_items_ordered(items, &[])
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn item(&self, i: usize) -> &Item {
        &self.items[i]
    }

    pub fn aspect_names(&self) -> &[String] {
        &self.aspect_names
    }

    pub fn aspect_count(&self) -> usize {
        self.aspect_names.len()
    }

    pub fn aspect_index(&self, name: &str) -> Option<usize> {
        self.aspect_index.get(name).copied()
    }

    /// Dense value id of item `i` for aspect `p`, or `None` when missing.
    pub fn value_id(&self, p: usize, i: usize) -> Option<u32> {
        self.value_ids[p][i]
    }

    /// Number of distinct value tokens of aspect `p` across the catalog.
    pub fn value_vocab_len(&self, p: usize) -> usize {
        self.value_tokens[p].len()
    }

    pub fn value_token(&self, p: usize, id: u32) -> &str {
        &self.value_tokens[p][id as usize]
    }

    /// Counts value tokens of `aspect` over the items in `subset` (catalog
    /// indices). Items missing the aspect contribute nothing.
    pub fn aspect_value_counts(
        &self,
        subset: &[usize],
        aspect: &str,
    ) -> Result<BTreeMap<String, usize>> {
        let p = self
            .aspect_index(aspect)
            .ok_or_else(|| Error::UnknownAspect(aspect.to_string()))?;
        let mut counts = BTreeMap::new();
        for &i in subset {
            if i >= self.items.len() {
                return Err(Error::InvalidParam(format!(
                    "item index {i} out of range for catalog of {}",
                    self.items.len()
                )));
            }
            if let Some(id) = self.value_ids[p][i] {
                *counts.entry(self.value_tokens[p][id as usize].clone()).or_insert(0) += 1;
            }
        }
        Ok(counts)
    }
}

/// Normalizes a value token: trims surrounding whitespace and case-folds.
/// Returns `None` for an empty cell.
fn fold_value(raw: &str) -> Option<String> {
    let t = raw.trim();
    if t.is_empty() {
        None
    } else {
        Some(t.to_lowercase())
    }
}

enum Column {
    Id,
    Text,
    Aspect(String),
}

fn classify_header(headers: &csv::StringRecord) -> Result<Vec<Column>> {
    let mut cols = Vec::with_capacity(headers.len());
    let mut id_seen = false;
    let mut aspect_seen: HashSet<String> = HashSet::new();
    for raw in headers.iter() {
        let name = raw.trim();
        if name == "id" {
            if id_seen {
                return Err(Error::Parse("duplicate column `id`".into()));
            }
            id_seen = true;
            cols.push(Column::Id);
        } else if let Some(rest) = name.strip_prefix("text:") {
            if rest.trim().is_empty() {
                return Err(Error::Parse(format!("malformed column `{name}`: empty text name")));
            }
            cols.push(Column::Text);
        } else if let Some(rest) = name.strip_prefix("aspect:") {
            let aspect = rest.trim();
            if aspect.is_empty() {
                return Err(Error::Parse(format!("malformed column `{name}`: empty aspect name")));
            }
            if !aspect_seen.insert(aspect.to_string()) {
                return Err(Error::Parse(format!("duplicate column `{name}`")));
            }
            cols.push(Column::Aspect(aspect.to_string()));
        } else {
            return Err(Error::Parse(format!("unrecognized column `{name}`")));
        }
    }
    if !id_seen {
        return Err(Error::Parse("missing required column `id`".into()));
    }
    Ok(cols)
}

/// Loads a catalog from CSV bytes. See the module docs for the format.
pub fn load_catalog_from_reader<R: Read>(
    reader: R,
    config: &IngestConfig,
) -> Result<(Catalog, IngestStats)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let cols = classify_header(rdr.headers()?)?;

    let aspect_order: Vec<String> = cols
        .iter()
        .filter_map(|c| match c {
            Column::Aspect(a) => Some(a.clone()),
            _ => None,
        })
        .collect();

    let mut items = Vec::new();
    let mut read = 0usize;
    let mut seen_ids: HashSet<String> = HashSet::new();
    for record in rdr.records() {
        let record = record?;
        read += 1;
        let mut id = String::new();
        let mut text_parts: Vec<&str> = Vec::new();
        let mut aspects = BTreeMap::new();
        for (col, cell) in cols.iter().zip(record.iter()) {
            match col {
                Column::Id => id = cell.trim().to_string(),
                Column::Text => {
                    let t = cell.trim();
                    if !t.is_empty() {
                        text_parts.push(t);
                    }
                }
                Column::Aspect(name) => {
                    if let Some(v) = fold_value(cell) {
                        aspects.insert(name.clone(), v);
                    }
                }
            }
        }
        if id.is_empty() {
            return Err(Error::Parse(format!("row {read}: empty id")));
        }
        if !seen_ids.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        items.push(Item { id, text: text_parts.join(" "), aspects });
    }

    let kept_items: Vec<Item> = items
        .into_iter()
        .filter(|item| {
            item.aspects.len() >= config.min_aspects
                && !config.exclude.iter().any(|f| {
                    item.aspects.get(&f.aspect).map(String::as_str)
                        == fold_value(&f.value).as_deref()
                })
        })
        .collect();
    let kept = kept_items.len();
    let stats = IngestStats { read, kept, dropped: read - kept };
    let catalog = Catalog::from_items_ordered(kept_items, &aspect_order)?;
    Ok((catalog, stats))
}

/// Loads a catalog CSV from disk.
pub fn load_catalog<P: AsRef<Path>>(
    path: P,
    config: &IngestConfig,
) -> Result<(Catalog, IngestStats)> {
    let file = std::fs::File::open(path)?;
    load_catalog_from_reader(BufReader::new(file), config)
}

/// A list of queries, one per line. `#`-prefixed lines and blank lines are
/// ignored.
#[derive(Debug, Clone, Default)]
pub struct QuerySet {
    pub queries: Vec<String>,
}

impl QuerySet {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut queries = Vec::new();
        for line in BufReader::new(reader).lines() {
            let line = line?;
            let q = line.trim();
            if q.is_empty() || q.starts_with('#') {
                continue;
            }
            queries.push(q.to_string());
        }
        Ok(Self { queries })
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(BufReader::new(file))
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}
