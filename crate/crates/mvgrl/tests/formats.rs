use std::path::Path;

use mvgrl::checkpoint::{Checkpoint, CheckpointError, MAGIC, VERSION};
use mvgrl::config::{self, build, parse_text, ConfigError};
use mvgrl::manifest::{fingerprint, RunManifest};
use mvgrl_core::diffusion::ViewKind;
use mvgrl_core::model::Model;
use mvgrl_core::objectives::EstimatorKind;
use mvgrl_core::training::TrainConfig;

/// Fills every parameter with deterministic values spanning many exponents.
fn perturb(model: &mut Model) {
    let mut x: u64 = 0x9e37_79b9_7f4a_7c15;
    for m in model.params_mut().values_mut() {
        for v in m.as_mut_slice() {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            *v = f64::from_bits(x >> 2) * if x & 1 == 0 { 1.0 } else { -1.0 };
        }
    }
}

fn small_config() -> TrainConfig {
    TrainConfig {
        hidden: 6,
        layers: 2,
        views: vec![ViewKind::Adjacency, ViewKind::Ppr, ViewKind::Heat],
        ..TrainConfig::default()
    }
}

fn bits(model: &Model) -> Vec<(String, Vec<u64>)> {
    model
        .params()
        .iter()
        .map(|(n, m)| (n.to_owned(), m.as_slice().iter().map(|v| v.to_bits()).collect()))
        .collect()
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let cfg = small_config();
    let mut model = Model::new(cfg.model_config(5), 3).unwrap();
    perturb(&mut model);
    let ckpt = Checkpoint::new(cfg.clone(), model.clone());
    let bytes = ckpt.to_bytes();
    assert_eq!(&bytes[..4], &MAGIC);
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), VERSION);
    let back = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(back.config, cfg);
    assert_eq!(bits(&back.model), bits(&model));
    assert_eq!(back.to_bytes(), bytes);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.mvgk");
    ckpt.save(&path).unwrap();
    assert_eq!(bits(&Checkpoint::load(&path).unwrap().model), bits(&model));
}

#[test]
fn checkpoint_rejects_corruption() {
    let cfg = small_config();
    let bytes = Checkpoint::new(cfg.clone(), Model::new(cfg.model_config(4), 0).unwrap()).to_bytes();
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(Checkpoint::from_bytes(&bad), Err(CheckpointError::Magic)));
    let mut bad = bytes.clone();
    bad[4] = 9;
    assert!(matches!(Checkpoint::from_bytes(&bad), Err(CheckpointError::Version(9))));
    assert!(matches!(
        Checkpoint::from_bytes(&bytes[..bytes.len() - 3]),
        Err(CheckpointError::Truncated(_))
    ));
    let mut long = bytes;
    long.push(0);
    assert!(matches!(Checkpoint::from_bytes(&long), Err(CheckpointError::Trailing(1))));
}

#[test]
fn key_value_config() {
    let text = "# MUTAG-like\nviews = adjacency, ppr\nlayers = 4\nestimator = jsd\nhidden = 512 # width\nepsilon = null\n";
    let cfg = build(&parse_text(text, Path::new("x.cfg")).unwrap()).unwrap();
    assert_eq!(cfg.views, vec![ViewKind::Adjacency, ViewKind::Ppr]);
    assert_eq!(cfg.layers, 4);
    assert_eq!(cfg.hidden, 512);
    assert_eq!(cfg.estimator, EstimatorKind::Jsd);
    assert_eq!(cfg.epsilon, None);
}

#[test]
fn json_config_and_scalar_to_list() {
    let text = r#"{"views": "ppr", "estimator": "ntxent", "topk": 32}"#;
    let cfg = build(&parse_text(text, Path::new("x.json")).unwrap()).unwrap();
    assert_eq!(cfg.views, vec![ViewKind::Ppr]);
    assert_eq!(cfg.estimator, EstimatorKind::NtXent);
    assert_eq!(cfg.topk, Some(32));
}

#[test]
fn config_lists_every_problem() {
    let text = "bogus = 1\nlayers = 0\nestimator = mine\nalpha = 1.5\nlr = -1\n";
    let err = build(&parse_text(text, Path::new("x.cfg")).unwrap()).unwrap_err();
    let ConfigError::Invalid(problems) = err else {
        panic!("expected validation problems");
    };
    let keys: Vec<&str> = problems.iter().map(|p| p.key.as_str()).collect();
    for k in ["bogus", "layers", "estimator", "alpha", "lr"] {
        assert!(keys.contains(&k), "{k} missing from {keys:?}");
    }
}

#[test]
fn config_syntax_error_names_line() {
    match parse_text("layers = 2\nnonsense\n", Path::new("x.cfg")).unwrap_err() {
        ConfigError::Syntax { line, .. } => assert_eq!(line, 2),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn config_text_round_trip() {
    let cfg = small_config();
    let text = config::to_text(&cfg);
    assert_eq!(build(&parse_text(&text, Path::new("x.cfg")).unwrap()).unwrap(), cfg);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        build(&config::read_file(&path).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 2);
}

#[test]
fn fingerprint_tracks_content() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.txt"), "1\n").unwrap();
    let first = fingerprint(dir.path()).unwrap();
    assert!(first.starts_with("sha256:") && first.len() == 7 + 64);
    assert_eq!(fingerprint(dir.path()).unwrap(), first);
    std::fs::write(dir.path().join("a.txt"), "2\n").unwrap();
    assert_ne!(fingerprint(dir.path()).unwrap(), first);
}

#[test]
fn manifest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = RunManifest {
        tool_version: mvgrl::manifest::tool_version(),
        command: "train".into(),
        dataset: mvgrl::manifest::DatasetRef {
            path: "data/x".into(),
            format: mvgrl::io::DatasetFormat::Bundle,
            fingerprint: "sha256:00".into(),
        },
        seed: 9,
        strict_deterministic: true,
        config: small_config(),
        artifacts: Default::default(),
    };
    let path = dir.path().join("manifest.json");
    m.write(&path).unwrap();
    assert_eq!(RunManifest::read(&path).unwrap(), m);
}
