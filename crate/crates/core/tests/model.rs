use quesco::model::{forward, positional_encoding, ModelConfig, ParamStore};
use quesco::rng::stream;

fn config(n_blocks: usize, normalize: bool) -> ModelConfig {
    ModelConfig {
        d_embed: 8,
        n_blocks,
        d_ff: 6,
        d_hidden: 5,
        d_proj: 4,
        normalize,
        max_len: 16,
    }
}

#[test]
fn without_blocks_the_representation_is_the_mean_embedding() {
    let cfg = config(0, true);
    let params = ParamStore::init(&cfg, 12, &mut stream(1, "model", ""));
    let ids = [3, 7, 7, 10, 2];
    let f = forward(&params, &cfg, &ids).unwrap();
    for j in 0..cfg.d_embed {
        let mean = ids.iter().map(|&i| params.embedding[[i, j]]).sum::<f64>() / ids.len() as f64;
        assert!((f.rep[j] - mean).abs() < 1e-15);
    }
    let shuffled = forward(&params, &cfg, &[10, 7, 2, 3, 7]).unwrap();
    for j in 0..cfg.d_embed {
        assert!((shuffled.rep[j] - f.rep[j]).abs() < 1e-15);
    }
}

#[test]
fn attention_blocks_see_token_order() {
    let cfg = config(1, true);
    let params = ParamStore::init(&cfg, 12, &mut stream(2, "model", ""));
    let a = forward(&params, &cfg, &[3, 7, 10]).unwrap();
    let b = forward(&params, &cfg, &[10, 7, 3]).unwrap();
    assert!(a.rep.iter().zip(&b.rep).any(|(x, y)| (x - y).abs() > 1e-12));
}

#[test]
fn normalized_keys_have_unit_length() {
    for blocks in 0..=2 {
        let cfg = config(blocks, true);
        let params = ParamStore::init(&cfg, 12, &mut stream(blocks as u64, "model", ""));
        let f = forward(&params, &cfg, &[1, 4, 5, 6]).unwrap();
        assert!((f.key.dot(&f.key).sqrt() - 1.0).abs() < 1e-12);
        assert_eq!(f.key.len(), cfg.d_proj);
        assert_eq!(f.rep.len(), cfg.d_embed);
    }
}

#[test]
fn rejects_empty_and_out_of_vocabulary_input() {
    let cfg = config(1, true);
    let params = ParamStore::init(&cfg, 12, &mut stream(0, "model", ""));
    assert!(forward(&params, &cfg, &[]).is_err());
    assert!(forward(&params, &cfg, &[12]).is_err());
}

#[test]
fn position_codes_are_bounded_sinusoids() {
    let p = positional_encoding(5, 4);
    let scale = 0.5;
    assert!((p[[0, 0]] - 0.0).abs() < 1e-15);
    assert!((p[[0, 1]] - scale).abs() < 1e-15);
    assert!((p[[1, 0]] - scale * 1f64.sin()).abs() < 1e-15);
    assert!((p[[3, 2]] - scale * (3.0f64 / 100.0).sin()).abs() < 1e-15);
    assert!(p.iter().all(|v| v.abs() <= scale));
}

#[test]
fn named_tensors_round_trip_and_digest_tracks_values() {
    let cfg = config(2, false);
    let params = ParamStore::init(&cfg, 9, &mut stream(3, "model", ""));
    let back = ParamStore::from_named(&cfg, 9, &params.to_named()).unwrap();
    assert_eq!(back, params);
    assert_eq!(back.digest(), params.digest());
    let mut changed = params.clone();
    changed.embedding[[0, 0]] += 1e-12;
    assert_ne!(changed.digest(), params.digest());
    assert!(ParamStore::from_named(&config(1, false), 9, &params.to_named()).is_err());
}

#[test]
fn initialization_is_seeded() {
    let cfg = config(1, true);
    let a = ParamStore::init(&cfg, 10, &mut stream(5, "init", "params"));
    let b = ParamStore::init(&cfg, 10, &mut stream(5, "init", "params"));
    let c = ParamStore::init(&cfg, 10, &mut stream(6, "init", "params"));
    assert_eq!(a, b);
    assert_ne!(a, c);
}
