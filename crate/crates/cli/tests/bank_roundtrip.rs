use std::fs;
use std::path::Path;

use dielq::bankfile::{sidecar_path, BankFileError, HEADER_LEN};
use dielq::{load_bank, run, save_bank, RunConfig, RunOptions};
use dielq_core::lattice::Grid;
use dielq_core::medium::{build_profile, Descriptor, MediumProfile};
use dielq_core::modes::{solve_modes, ModeBank, QOperator};

fn smooth_bank() -> ModeBank {
    let g = Grid::cubic(8, 0.5).unwrap();
    let m = build_profile(&Descriptor::SmoothRandom { seed: 4, eps_min: 1.0, eps_max: 3.0, terms: 6 }, g).unwrap();
    solve_modes(&QOperator::new(m), 24, 1e-9).unwrap()
}

fn assert_bit_exact(a: &ModeBank, b: &ModeBank) {
    assert_eq!(a.len(), b.len());
    assert_eq!(a.grid(), b.grid());
    assert_eq!(a.variant(), b.variant());
    assert!(a.frequencies().iter().zip(b.frequencies()).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert!(a.g_values().iter().zip(b.g_values()).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_eq!(a.medium().eps(), b.medium().eps());
    assert_eq!(a.band_top().to_bits(), b.band_top().to_bits());
    assert_eq!(a.is_complete(), b.is_complete());
}

fn files(path: &Path) -> (Vec<u8>, Vec<u8>) {
    (fs::read(path).unwrap(), fs::read(sidecar_path(path)).unwrap())
}

#[test]
fn save_load_save_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let bank = smooth_bank();
    let a = dir.path().join("a.qmb");
    let b = dir.path().join("b.qmb");
    save_bank(&bank, &a).unwrap();
    let loaded = load_bank(&a).unwrap();
    assert_bit_exact(&bank, &loaded);
    save_bank(&loaded, &b).unwrap();
    assert_eq!(files(&a), files(&b));
}

#[test]
fn sampled_and_magnetic_media_survive_the_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid::new([4, 3, 5], 1.0).unwrap();
    let eps: Vec<f64> = (0..g.vector_len()).map(|i| 1.0 + (i % 7) as f64 * 0.3).collect();
    let m = MediumProfile::from_samples(g, eps).unwrap();
    let mu = Descriptor::Sphere { center: [2.0, 1.5, 2.5], radius: 1.2, eps_in: 2.0, eps_out: 1.0 };
    let m = m.with_mu(&mu).unwrap();
    let bank = solve_modes(&QOperator::magnetic(m), 10, 1e-10).unwrap();
    let a = dir.path().join("m.qmb");
    save_bank(&bank, &a).unwrap();
    let loaded = load_bank(&a).unwrap();
    assert_bit_exact(&bank, &loaded);
    assert_eq!(loaded.medium().mu(), bank.medium().mu());
    let b = dir.path().join("m2.qmb");
    save_bank(&loaded, &b).unwrap();
    assert_eq!(files(&a), files(&b));
}

/// Start of the header field holding byte `i`.
fn field_start(i: usize) -> usize {
    match i {
        0..=3 => i,
        4..=7 => 4,
        8..=19 => 8 + 4 * ((i - 8) / 4),
        20..=27 => 20,
        28..=31 => 28,
        _ => 32,
    }
}

#[test]
fn every_corrupted_header_byte_is_located() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.qmb");
    save_bank(&smooth_bank(), &path).unwrap();
    let good = fs::read(&path).unwrap();
    for i in 0..HEADER_LEN {
        let mut bad = good.clone();
        bad[i] ^= 0x5a;
        fs::write(&path, &bad).unwrap();
        let err = load_bank(&path).unwrap_err();
        let want = format!("byte offset {}", field_start(i));
        assert!(err.to_string().contains(&want), "byte {i}: {err}");
    }
}

#[test]
fn truncated_body_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.qmb");
    save_bank(&smooth_bank(), &path).unwrap();
    let good = fs::read(&path).unwrap();
    fs::write(&path, &good[..good.len() - 8]).unwrap();
    assert!(matches!(load_bank(&path).unwrap_err(), BankFileError::Truncated { .. }));
    fs::write(&path, &good[..20]).unwrap();
    assert!(matches!(load_bank(&path).unwrap_err(), BankFileError::Truncated { offset: 20, .. }));
}

#[test]
fn reloaded_bank_reproduces_the_ldos_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let base = r#"{
        "grid": {"dims": [12, 12, 12], "spacing": 1.0},
        "medium": {"kind": "smooth_random", "seed": 8, "eps_min": 1.0, "eps_max": 2.5},
        "seed": 3,
        "atoms": [{"position": [3.3, 6.1, 2.0], "levels": [0.0, 0.4],
                   "dipoles": [[0,0,0],[0.2,0.7,-0.4],[0.2,0.7,-0.4],[0,0,0]], "cavity_radius": 0.0}],
        "ldos": {"omega_min": 0.2, "omega_max": 0.45, "samples": 101, "broadening": {"eta": 0.01}},
        TASKS
    }"#;
    let first = RunConfig::from_json(&base.replace("TASKS", r#""modes": 20, "tasks": ["modes", "ldos"]"#)).unwrap();
    let out1 = dir.path().join("one");
    run(&first, &RunOptions::new(&out1)).unwrap();

    let bank_path = out1.join("bank.qmb");
    let second = RunConfig::from_json(
        &base.replace("TASKS", &format!(r#""bank_in": {:?}, "tasks": ["ldos"]"#, bank_path.to_str().unwrap())),
    )
    .unwrap();
    let out2 = dir.path().join("two");
    run(&second, &RunOptions::new(&out2)).unwrap();
    let a = fs::read(out1.join("ldos_0.csv")).unwrap();
    let b = fs::read(out2.join("ldos_0.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 102);
    let peak = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).fold(0.0, f64::max);
    assert!(peak > 0.0);
}
