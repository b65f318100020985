#![allow(dead_code)]

use std::sync::OnceLock;

use fedfair::datasets::{load_adult, load_compas, read_adult, read_compas, Dataset};
use fedfair::surrogate::{write_adult, write_compas, ADULT_ROWS, COMPAS_ROWS};

/// Seed of the synthetic tables used when no real file is configured.
pub const SURROGATE_SEED: u64 = 1;

fn synthetic(write: fn(&mut Vec<u8>, usize, u64) -> fedfair::Result<()>, rows: usize) -> Vec<u8> {
    let mut buf = Vec::new();
    write(&mut buf, rows, SURROGATE_SEED).expect("synthetic table");
    buf
}

/// Full Adult table: `$FEDFAIR_ADULT` if set, the synthetic table otherwise.
pub fn adult() -> &'static Dataset {
    static D: OnceLock<Dataset> = OnceLock::new();
    D.get_or_init(|| match std::env::var_os("FEDFAIR_ADULT") {
        Some(p) => load_adult(p).expect("FEDFAIR_ADULT"),
        None => read_adult(synthetic(|b, r, s| write_adult(b, r, s), ADULT_ROWS).as_slice())
            .expect("synthetic adult"),
    })
}

/// Full Compas table: `$FEDFAIR_COMPAS` if set, the synthetic table otherwise.
pub fn compas() -> &'static Dataset {
    static D: OnceLock<Dataset> = OnceLock::new();
    D.get_or_init(|| match std::env::var_os("FEDFAIR_COMPAS") {
        Some(p) => load_compas(p).expect("FEDFAIR_COMPAS"),
        None => read_compas(synthetic(|b, r, s| write_compas(b, r, s), COMPAS_ROWS).as_slice())
            .expect("synthetic compas"),
    })
}

pub fn source(var: &str) -> String {
    match std::env::var(var) {
        Ok(p) => p,
        Err(_) => format!("synthetic (seed {SURROGATE_SEED})"),
    }
}

/// First `n` rows of the synthetic Adult table, for quick tests.
pub fn small_adult(n: usize, seed: u64) -> Dataset {
    let mut buf = Vec::new();
    write_adult(&mut buf, n, seed).expect("synthetic table");
    read_adult(buf.as_slice()).expect("synthetic adult")
}
