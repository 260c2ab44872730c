use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::frontend::ast::is_builtin;

/// How a call to a function without a body behaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    /// Deterministic function of its arguments.
    Pure,
    /// Returns an arbitrary value.
    Havoc,
    /// Returns an arbitrary value after waiting for an external event.
    Blocking,
    /// Returns fresh memory or null.
    Alloc,
    /// Never returns.
    Noreturn,
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "pure" => ModelKind::Pure,
            "havoc" => ModelKind::Havoc,
            "blocking" => ModelKind::Blocking,
            "alloc" => ModelKind::Alloc,
            "noreturn" => ModelKind::Noreturn,
            other => return Err(format!("unknown model kind `{other}`")),
        })
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Pure => "pure",
            ModelKind::Havoc => "havoc",
            ModelKind::Blocking => "blocking",
            ModelKind::Alloc => "alloc",
            ModelKind::Noreturn => "noreturn",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("models line {line}: expected `<name> <kind>`")]
    Syntax { line: usize },
    #[error("models line {line}: {msg}")]
    Kind { line: usize, msg: String },
    #[error("models line {line}: `{name}` is a builtin and cannot be modeled")]
    Builtin { line: usize, name: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModelTable {
    models: BTreeMap<String, ModelKind>,
}

impl ModelTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parse `<name> <kind>` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let mut table = ModelTable::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let parts: Vec<&str> = body.split_whitespace().collect();
            let [name, kind] = parts.as_slice() else {
                return Err(ModelError::Syntax { line });
            };
            let kind = kind.parse().map_err(|msg| ModelError::Kind { line, msg })?;
            if !table.insert(name, kind) {
                return Err(ModelError::Builtin {
                    line,
                    name: name.to_string(),
                });
            }
        }
        Ok(table)
    }

    /// False, and nothing inserted, for builtin names.
    pub fn insert(&mut self, name: &str, kind: ModelKind) -> bool {
        if is_builtin(name) {
            return false;
        }
        self.models.insert(name.to_string(), kind);
        true
    }

    pub fn get(&self, name: &str) -> Option<ModelKind> {
        self.models.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.models.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, ModelKind)> {
        self.models.iter().map(|(n, k)| (n.as_str(), *k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_kinds_and_comments() {
        let t = ModelTable::parse(
            "# api models\ngetc havoc\nwait_event blocking # pump\n\nhash pure\n",
        )
        .unwrap();
        assert_eq!(t.get("getc"), Some(ModelKind::Havoc));
        assert_eq!(t.get("wait_event"), Some(ModelKind::Blocking));
        assert_eq!(t.get("hash"), Some(ModelKind::Pure));
        assert_eq!(t.get("other"), None);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(
            ModelTable::parse("getc sometimes"),
            Err(ModelError::Kind { line: 1, .. })
        ));
        assert!(matches!(
            ModelTable::parse("getc"),
            Err(ModelError::Syntax { line: 1 })
        ));
        assert!(matches!(
            ModelTable::parse("ok pure\nmalloc havoc"),
            Err(ModelError::Builtin { line: 2, .. })
        ));
    }
}
