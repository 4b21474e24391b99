#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_telesynth"))
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("spawn telesynth")
}

pub fn run_in(out: &Path, config: &Path, args: &[&str]) -> Output {
    let mut all = vec![
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    all.extend_from_slice(args);
    run(&all)
}

/// Two-layer networks of at most 64 nodes.
pub fn reduced_config(n_real: usize, n_synthetic: usize) -> String {
    let mut s = format!(
        "n_real = {n_real}\nn_synthetic = {n_synthetic}\nepochs.frequency = 20\nepochs.severity = 60\n"
    );
    for (prefix, nodes, batch) in [
        ("freq1", 64, 64),
        ("freq2", 32, 16),
        ("freq3", 16, 8),
        ("severity", 64, 16),
    ] {
        s.push_str(&format!(
            "{prefix}.hidden_layers = 2\n{prefix}.nodes_first = {nodes}\n{prefix}.nodes_rest = {nodes}\n\
             {prefix}.batch_size = {batch}\n{prefix}.learning_rate = 0.002\n{prefix}.activation = relu\n"
        ));
    }
    s
}

pub fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

pub fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
