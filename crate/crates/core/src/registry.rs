use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Dense app index, assigned in first-seen order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AppId(pub usize);

impl AppId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for AppId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Bidirectional app name <-> [`AppId`] map. Ids are never reused or moved.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AppRegistry {
    by_name: HashMap<String, AppId>,
    names: Vec<String>,
}

impl AppRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id for `name`, and whether it was newly inserted.
    pub fn intern(&mut self, name: &str) -> (AppId, bool) {
        if let Some(id) = self.by_name.get(name) {
            return (*id, false);
        }
        let id = AppId(self.names.len());
        self.names.push(name.to_owned());
        self.by_name.insert(name.to_owned(), id);
        (id, true)
    }

    pub fn get(&self, name: &str) -> Option<AppId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: AppId) -> Option<&str> {
        self.names.get(id.0).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Names in registration order.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn contains(&self, id: AppId) -> bool {
        id.0 < self.names.len()
    }
}
