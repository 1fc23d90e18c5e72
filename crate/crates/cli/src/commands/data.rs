use std::io::{BufRead, Write};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use socsim_core::persistence::{EntityKind, Filter, Store};

use super::open_store;
use crate::{DataAction, Output};

/// One line of a fixture file.
#[derive(Debug, Serialize, Deserialize)]
pub struct FixtureLine {
    pub kind: String,
    pub document: Value,
}

/// Loads every line, stopping at the first bad one. Blank lines are skipped.
/// Returns the number of documents written.
pub async fn import_jsonl(store: &Store, reader: impl BufRead) -> Result<usize> {
    let mut count = 0;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.with_context(|| format!("line {lineno}: cannot read"))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: FixtureLine =
            serde_json::from_str(&line).map_err(|e| anyhow!("line {lineno}: malformed fixture: {e}"))?;
        let kind: EntityKind = entry.kind.parse().map_err(|e| anyhow!("line {lineno}: {e}"))?;
        let pk = match entry.document.get(kind.pk_field()).and_then(Value::as_str) {
            Some(pk) => pk.to_owned(),
            None => bail!("line {lineno}: document has no `{}`", kind.pk_field()),
        };
        store
            .put(kind, &pk.as_str().into(), &entry.document)
            .await
            .map_err(|e| anyhow!("line {lineno}: {e}"))?;
        count += 1;
    }
    Ok(count)
}

/// Writes every stored document, kind by kind, each kind sorted by pk.
pub async fn export_jsonl(store: &Store, mut writer: impl Write) -> Result<usize> {
    let mut count = 0;
    for kind in EntityKind::ALL {
        for document in store.list(kind, &Filter::new()).await? {
            let line = FixtureLine { kind: kind.as_str().to_owned(), document };
            serde_json::to_writer(&mut writer, &line)?;
            writer.write_all(b"\n")?;
            count += 1;
        }
    }
    writer.flush()?;
    Ok(count)
}

pub async fn run(action: DataAction, store_url: Option<&str>, out: &mut Output<'_>) -> Result<()> {
    let store = open_store(store_url).await?;
    match action {
        DataAction::Import { file } => {
            let f = std::fs::File::open(&file).with_context(|| format!("cannot open {}", file.display()))?;
            let n = import_jsonl(&store, std::io::BufReader::new(f)).await?;
            out.emit(&format!("imported {n} documents"), &json!({"imported": n}))
        }
        DataAction::Export { file } => {
            let f = std::fs::File::create(&file).with_context(|| format!("cannot create {}", file.display()))?;
            let n = export_jsonl(&store, std::io::BufWriter::new(f)).await?;
            out.emit(&format!("exported {n} documents"), &json!({"exported": n}))
        }
    }
}
