//! Properties of the analysis diagnostics.

use fdsl_core::analysis::{self, FilterMode};
use fdsl_core::vit::{save_checkpoint, Checkpoint, ModelConfig, ViTParams};
use fdsl_core::Image;
use proptest::prelude::*;

fn stochastic_rows(raw: &[f64], n: usize) -> Vec<f64> {
    raw.chunks(n)
        .flat_map(|r| {
            let s: f64 = r.iter().sum();
            r.iter().map(move |v| v / s).collect::<Vec<_>>()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cosine_grid_is_symmetric_with_unit_diagonal(rows in prop::collection::vec(-2.0f64..2.0, 6 * 5)) {
        let m = analysis::cosine_matrix(&rows, 6, 5);
        for i in 0..6 {
            prop_assert!((m[i * 6 + i] - 1.0).abs() <= 1e-5);
            for j in 0..6 {
                prop_assert!((m[i * 6 + j] - m[j * 6 + i]).abs() <= 1e-6);
                prop_assert!((-1.0..=1.0).contains(&m[i * 6 + j]));
            }
        }
    }

    #[test]
    fn distance_of_a_mixture_lies_between_its_parts(
        a in prop::collection::vec(0.01f64..1.0, 16),
        b in prop::collection::vec(0.01f64..1.0, 16),
        t in 0.0f64..=1.0,
    ) {
        let (a, b) = (stochastic_rows(&a, 4), stochastic_rows(&b, 4));
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| t * x + (1.0 - t) * y).collect();
        let da = analysis::attention_distance(&a, (2, 2), 8).unwrap();
        let db = analysis::attention_distance(&b, (2, 2), 8).unwrap();
        let dm = analysis::attention_distance(&mix, (2, 2), 8).unwrap();
        prop_assert!(dm >= da.min(db) - 1e-12 && dm <= da.max(db) + 1e-12);
    }

    #[test]
    fn distances_stay_within_the_grid_diagonal(raw in prop::collection::vec(0.0f64..1.0, 81)) {
        let d = analysis::attention_distance(&raw, (3, 3), 4).unwrap();
        prop_assert!((0.0..=(2.0 * 144.0f64).sqrt()).contains(&d));
    }

    #[test]
    fn heat_is_normalized(weights in prop::collection::vec(0.0f64..1.0, 16)) {
        let m = analysis::render_heatmap(&weights, (4, 4), &Image::new(16, 16, 1), false).unwrap();
        prop_assert!(m.heat.iter().all(|h| (0.0..=1.0).contains(h)));
    }
}

#[test]
fn analysis_never_modifies_the_checkpoint_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ModelConfig::micro(3);
    let ckpt = Checkpoint::new(cfg, ViTParams::init(&cfg, 1)).unwrap();
    let path = dir.path().join("model.fdsl");
    save_checkpoint(&path, &ckpt).unwrap();
    let before = std::fs::read(&path).unwrap();
    let loaded = fdsl_core::vit::load_checkpoint(&path).unwrap();
    let probe = Image::from_raw(8, 8, 1, (0..64).map(|i| (i * 4) as u8).collect()).unwrap();
    let out = dir.path().join("out");
    std::fs::create_dir_all(&out).unwrap();
    analysis::embedding_filters(&loaded, 4, FilterMode::Raw).unwrap().write(&out).unwrap();
    analysis::pos_embed_similarity(&loaded).unwrap().write(&out).unwrap();
    analysis::mean_attention_distance(&loaded, std::slice::from_ref(&probe)).unwrap().write(&out).unwrap();
    analysis::attention_map(&loaded, &probe, true).unwrap().write(&out).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), before);
    for entry in std::fs::read_dir(&out).unwrap() {
        let p = entry.unwrap().path();
        if matches!(p.extension().and_then(|e| e.to_str()), Some("pgm" | "ppm")) {
            Image::read(&p).unwrap();
        }
    }
}

#[test]
fn identical_position_rows_are_fully_similar() {
    let cfg = ModelConfig::micro(3);
    let mut p = ViTParams::init(&cfg, 1);
    for i in 1..cfg.tokens() {
        p.pos_embed.row_mut(i).copy_from_slice(&[0.5, -1.0, 2.0, 0.0, 1.0, 1.0, -0.5, 0.25]);
    }
    let grid = analysis::pos_embed_similarity(&Checkpoint::new(cfg, p).unwrap()).unwrap();
    assert!(grid.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
}
