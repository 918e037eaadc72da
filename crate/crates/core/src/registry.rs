//! Name-keyed registries for interchangeable strategies.
//!
//! Each strategy family (prediction losses, optimizers, significance tests)
//! exposes a trait and a `registry()` constructor that returns a
//! [`Registry`] of factories keyed by a stable, lowercase name. Callers
//! resolve a name coming from the command line or a config file into a
//! boxed trait object at runtime.

use std::collections::BTreeMap;
use std::fmt;

/// Lookup failure for a strategy name.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} `{name}` (available: {available})")]
pub struct UnknownStrategy {
    pub kind: &'static str,
    pub name: String,
    pub available: String,
}

/// A set of factories of type `F`, keyed by name.
pub struct Registry<F> {
    kind: &'static str,
    entries: BTreeMap<&'static str, F>,
}

impl<F> Registry<F> {
    /// Creates an empty registry. `kind` is used in error messages only.
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Registers `factory` under `name`, replacing any previous entry.
    pub fn register(&mut self, name: &'static str, factory: F) -> &mut Self {
        self.entries.insert(name, factory);
        self
    }

    pub fn get(&self, name: &str) -> Result<&F, UnknownStrategy> {
        self.entries.get(name).ok_or_else(|| UnknownStrategy {
            kind: self.kind,
            name: name.to_string(),
            available: self.names().collect::<Vec<_>>().join(", "),
        })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    /// Registered names in lexicographic order.
    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }
}

impl<F> fmt::Debug for Registry<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("names", &self.entries.keys().collect::<Vec<_>>())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_and_unknown_name() {
        let mut reg: Registry<fn() -> u32> = Registry::new("widget");
        reg.register("one", || 1).register("two", || 2);
        assert_eq!((reg.get("two").unwrap())(), 2);
        assert!(reg.contains("one"));
        let err = reg.get("three").unwrap_err();
        assert_eq!(err.kind, "widget");
        assert_eq!(err.available, "one, two");
        assert!(err.to_string().contains("unknown widget `three`"));
    }
}
