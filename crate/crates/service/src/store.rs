//! Session persistence in an embedded key-value store.

use std::path::Path;

use redb::{Database, ReadableTable, TableDefinition};
use thiserror::Error;

use crate::session::Session;

const SESSIONS: TableDefinition<&str, &[u8]> = TableDefinition::new("sessions");

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("session store: {0}")]
    Db(String),
    #[error("corrupt session record {id:?}: {source}")]
    Corrupt {
        id: String,
        source: serde_json::Error,
    },
}

fn db_err(e: impl std::fmt::Display) -> StoreError {
    StoreError::Db(e.to_string())
}

/// Where sessions live. `Memory` keeps nothing beyond the process.
pub enum Store {
    Memory,
    Redb(Database),
}

impl Store {
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let db = Database::create(path).map_err(db_err)?;
        let tx = db.begin_write().map_err(db_err)?;
        tx.open_table(SESSIONS).map_err(db_err)?;
        tx.commit().map_err(db_err)?;
        Ok(Store::Redb(db))
    }

    pub fn save(&self, session: &Session) -> Result<(), StoreError> {
        let Store::Redb(db) = self else {
            return Ok(());
        };
        let bytes = serde_json::to_vec(session).expect("sessions serialize");
        let tx = db.begin_write().map_err(db_err)?;
        {
            let mut table = tx.open_table(SESSIONS).map_err(db_err)?;
            table
                .insert(session.id.as_str(), bytes.as_slice())
                .map_err(db_err)?;
        }
        tx.commit().map_err(db_err)
    }

    pub fn load_all(&self) -> Result<Vec<Session>, StoreError> {
        let Store::Redb(db) = self else {
            return Ok(Vec::new());
        };
        let tx = db.begin_read().map_err(db_err)?;
        let table = tx.open_table(SESSIONS).map_err(db_err)?;
        let mut out = Vec::new();
        for entry in table.iter().map_err(db_err)? {
            let (key, value) = entry.map_err(db_err)?;
            let session =
                serde_json::from_slice(value.value()).map_err(|source| StoreError::Corrupt {
                    id: key.value().to_string(),
                    source,
                })?;
            out.push(session);
        }
        Ok(out)
    }
}
