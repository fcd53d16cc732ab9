use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Named factories for one kind of strategy (losses, optimizers, ...).
pub struct Registry<T: ?Sized, A> {
    kind: &'static str,
    factories: BTreeMap<String, fn(&A) -> Box<T>>,
}

impl<T: ?Sized, A> Registry<T, A> {
    pub fn new(kind: &'static str) -> Self {
        Registry {
            kind,
            factories: BTreeMap::new(),
        }
    }

    /// Adds or replaces a factory.
    pub fn register(&mut self, name: &str, factory: fn(&A) -> Box<T>) -> &mut Self {
        self.factories.insert(name.to_string(), factory);
        self
    }

    pub fn create(&self, name: &str, args: &A) -> Result<Box<T>> {
        match self.factories.get(name) {
            Some(f) => Ok(f(args)),
            None => Err(Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().join(", "),
            }),
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn names(&self) -> Vec<String> {
        self.factories.keys().cloned().collect()
    }
}
