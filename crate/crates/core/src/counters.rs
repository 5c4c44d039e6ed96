//! Operation counters reported in solver traces.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

/// Per-solve instrumentation. Owned by a single solve; not shared across threads.
#[derive(Debug, Default)]
pub struct Counters {
    chol: Cell<u64>,
    matmul: Cell<u64>,
    prox: Cell<u64>,
    feval: Cell<u64>,
    hess_vec: Cell<u64>,
}

/// Plain copy of a [`Counters`] state.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterSnapshot {
    pub chol: u64,
    pub matmul: u64,
    pub prox: u64,
    pub feval: u64,
    pub hess_vec: u64,
}

impl Counters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_chol(&self) {
        self.chol.set(self.chol.get() + 1);
    }

    pub fn add_matmul(&self, n: u64) {
        self.matmul.set(self.matmul.get() + n);
    }

    pub fn add_prox(&self) {
        self.prox.set(self.prox.get() + 1);
    }

    pub fn add_feval(&self) {
        self.feval.set(self.feval.get() + 1);
    }

    pub fn add_hess_vec(&self) {
        self.hess_vec.set(self.hess_vec.get() + 1);
    }

    pub fn snapshot(&self) -> CounterSnapshot {
        CounterSnapshot {
            chol: self.chol.get(),
            matmul: self.matmul.get(),
            prox: self.prox.get(),
            feval: self.feval.get(),
            hess_vec: self.hess_vec.get(),
        }
    }
}

impl CounterSnapshot {
    pub fn since(&self, earlier: &CounterSnapshot) -> CounterSnapshot {
        CounterSnapshot {
            chol: self.chol - earlier.chol,
            matmul: self.matmul - earlier.matmul,
            prox: self.prox - earlier.prox,
            feval: self.feval - earlier.feval,
            hess_vec: self.hess_vec - earlier.hess_vec,
        }
    }
}
