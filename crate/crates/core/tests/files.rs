use std::fs;

use snn_dlbp::checkpoint::{load_weights, save_weights};
use snn_dlbp::config::{load_network_config, render_network_config};
use snn_dlbp::event_io::{load_events, write_events};
use snn_dlbp::network::{NetworkConfig, NetworkWeights};
use snn_dlbp::synth::{bar_dataset, BarSpec};
use snn_dlbp::tuning::init_weights;

#[test]
fn weights_survive_disk_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.snnw");
    let w = NetworkWeights::from_phi(init_weights(12, 20, 1.0, 0.5, 3).unwrap());
    save_weights(&path, &w).unwrap();
    assert_eq!(load_weights(&path).unwrap(), w);
    let bytes = fs::read(&path).unwrap();
    fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
    assert!(load_weights(&path).is_err());
}

#[test]
fn rendered_config_reloads_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.toml");
    let mut cfg = NetworkConfig::new(32, 64, 0.3).unwrap();
    cfg.error_mu = Some(0.25);
    fs::write(&path, render_network_config(&cfg).unwrap()).unwrap();
    assert_eq!(load_network_config(&path).unwrap(), cfg);
    assert!(load_network_config(dir.path().join("missing.toml")).is_err());
}

#[test]
fn event_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (streams, _) = bar_dataset(&BarSpec::default(), 2, 9).unwrap();
    for (i, s) in streams.iter().enumerate() {
        let path = dir.path().join(format!("{i}.evs"));
        write_events(&path, s).unwrap();
        assert_eq!(&load_events(&path).unwrap(), s);
    }
}
