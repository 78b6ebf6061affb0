//! Pre-training, fine-tuning and evaluation through the public API.

use std::path::Path;

use fdsl_core::dataset::{generate_dataset, GenerationConfig, RenderConfig, RenderMode, DEFAULT_WEIGHTS};
use fdsl_core::train::{
    self, adapt_for_finetune, evaluate, evaluate_params, load_cifar10_dir, FdslTask, LabeledSet, TrainConfig,
    CIFAR_RECORD,
};
use fdsl_core::vit::{encode_checkpoint, Checkpoint, ModelConfig, ViTParams};
use fdsl_core::Image;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_task(dir: &Path, categories: usize, instances: usize) -> FdslTask {
    let cfg = GenerationConfig {
        n_categories: categories,
        n_instances: instances,
        render: RenderConfig {
            image_size: 64,
            mode: RenderMode::Patch,
            ..RenderConfig::default()
        },
        threshold: 0.05,
        global_seed: 21,
        weights: DEFAULT_WEIGHTS,
    };
    generate_dataset(&cfg, dir).unwrap();
    FdslTask::load(dir).unwrap()
}

fn short(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 16,
        warmup_epochs: 2,
        seed,
        ..TrainConfig::default()
    }
}

fn random_set(n: usize, classes: usize, seed: u64) -> LabeledSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let images = (0..n)
        .map(|_| Image::from_raw(8, 8, 1, (0..64).map(|_| rng.random()).collect()).unwrap())
        .collect();
    let labels = (0..n).map(|_| rng.random_range(0..classes)).collect();
    LabeledSet::new(images, labels, classes).unwrap()
}

#[test]
fn nano_learns_four_categories() {
    let dir = tempfile::tempdir().unwrap();
    let task = small_task(dir.path(), 4, 32);
    let tc = TrainConfig {
        stop_at_train_acc: Some(0.95),
        ..short(30, 3)
    };
    let (_, log) = train::pretrain(&task, &tc, &ModelConfig::nano(4)).unwrap();
    let best = log.rows.iter().map(|r| r.train_acc).fold(0.0, f64::max);
    assert!(best >= 0.95, "{}", log.to_csv());
}

#[test]
fn zero_learning_rate_leaves_weights_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let task = small_task(dir.path(), 2, 8);
    let model = ModelConfig::nano(2);
    let tc = TrainConfig { lr: 0.0, ..short(2, 5) };
    let (ckpt, log) = train::pretrain(&task, &tc, &model).unwrap();
    assert_eq!(log.rows.len(), 2);
    assert_eq!(ckpt.params, ViTParams::init(&model, 5));

    let target = ModelConfig::nano(2);
    let (tuned, _) = train::finetune(&ckpt, &task.data, None, &tc, &target).unwrap();
    assert_eq!(tuned.params, adapt_for_finetune(&ckpt, &target, tc.seed).unwrap());
}

#[test]
fn deterministic_runs_give_identical_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let task = small_task(dir.path(), 2, 12);
    let model = ModelConfig::nano(2);
    let tc = short(2, 9);
    let (a, la) = train::pretrain(&task, &tc, &model).unwrap();
    let (b, lb) = train::pretrain(&task, &tc, &model).unwrap();
    assert_eq!(encode_checkpoint(&a), encode_checkpoint(&b));
    let strip = |l: &train::MetricsLog| l.rows.iter().map(|r| (r.epoch, r.train_loss, r.train_acc)).collect::<Vec<_>>();
    assert_eq!(strip(&la), strip(&lb));
}

#[test]
fn checkpoints_and_metrics_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let task = small_task(&dir.path().join("data"), 2, 4);
    let out = dir.path().join("run");
    std::fs::create_dir_all(&out).unwrap();
    let tc = TrainConfig {
        save_every: 1,
        out_dir: Some(out.clone()),
        ..short(2, 1)
    };
    train::pretrain(&task, &tc, &ModelConfig::nano(2)).unwrap();
    for f in ["epoch0001.fdsl", "epoch0002.fdsl", "final.fdsl", "metrics.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(csv.starts_with("epoch,train_loss,train_acc,eval_acc,seconds\n"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn constant_logit_model_scores_perfectly_on_its_argmax() {
    let cfg = ModelConfig::micro(4);
    let mut p = ViTParams::<f32>::zeros(&cfg);
    p.head_bias.data_mut().copy_from_slice(&[0.1, 0.3, 2.0, -1.0]);
    let ckpt = Checkpoint::new(cfg, p).unwrap();
    let mut data = random_set(20, 4, 2);
    data.labels.iter_mut().for_each(|l| *l = 2);
    assert_eq!(evaluate(&ckpt, &data).unwrap(), 1.0);
}

#[test]
fn untrained_model_is_at_chance() {
    let cfg = ModelConfig::micro(10);
    let ckpt = Checkpoint::new(cfg, ViTParams::init(&cfg, 4)).unwrap();
    let data = random_set(1000, 10, 8);
    let acc = evaluate(&ckpt, &data).unwrap();
    assert!((0.05..=0.17).contains(&acc), "{acc}");
    assert_eq!(acc, evaluate(&ckpt, &data).unwrap());
}

#[test]
fn evaluation_rejects_too_many_labels() {
    let cfg = ModelConfig::micro(3);
    let p = ViTParams::init(&cfg, 4);
    assert!(evaluate_params(&p, &cfg, &random_set(10, 5, 1)).is_err());
}

fn write_cifar_batch(path: &Path, labels: &[u8]) {
    let mut bytes = Vec::with_capacity(labels.len() * CIFAR_RECORD);
    for (i, &l) in labels.iter().enumerate() {
        bytes.push(l);
        bytes.extend((0..3072).map(|p| ((p + i) % 251) as u8));
    }
    std::fs::write(path, bytes).unwrap();
}

#[test]
fn cifar_directory_loading() {
    let dir = tempfile::tempdir().unwrap();
    write_cifar_batch(&dir.path().join("data_batch_1.bin"), &[0, 1, 2]);
    write_cifar_batch(&dir.path().join("data_batch_2.bin"), &[9]);
    write_cifar_batch(&dir.path().join("test_batch.bin"), &[4, 5]);
    let train_set = load_cifar10_dir(dir.path(), false).unwrap();
    assert_eq!(train_set.labels, vec![0, 1, 2, 9]);
    assert_eq!((train_set.images[0].width, train_set.images[0].channels), (32, 3));
    assert_eq!(load_cifar10_dir(dir.path(), true).unwrap().len(), 2);
    assert_eq!(LabeledSet::load_dir(dir.path(), true).unwrap().labels, vec![4, 5]);
    assert!(load_cifar10_dir(&dir.path().join("missing"), false).is_err());

    // Colour images feed a single-channel model after conversion and resizing.
    let cfg = ModelConfig::nano(10);
    let img = train::prepare_image(&train_set.images[0], &cfg);
    assert_eq!((img.width, img.height, img.channels), (64, 64, 1));
}

/// Transfer to real CIFAR-10 batches when `FDSL_CIFAR10_DIR` points at them.
#[test]
fn cifar10_transfer_when_available() {
    let Ok(cifar) = std::env::var("FDSL_CIFAR10_DIR") else {
        eprintln!("FDSL_CIFAR10_DIR not set; skipping CIFAR-10 transfer run");
        return;
    };
    let cifar = Path::new(&cifar);
    let train_set = load_cifar10_dir(cifar, false).unwrap().take_per_class(500);
    let test_set = load_cifar10_dir(cifar, true).unwrap().take_per_class(100);
    let dir = tempfile::tempdir().unwrap();
    let task = small_task(dir.path(), 16, 64);
    let (pre, _) = train::pretrain(&task, &short(50, 1), &ModelConfig::nano(16)).unwrap();
    let model = ModelConfig::nano(10);
    let tc = short(10, 2);
    let (_, tuned) = train::finetune(&pre, &train_set, Some(&test_set), &tc, &model).unwrap();
    let (_, scratch) = train::train_from_scratch(&train_set, Some(&test_set), &tc, &model).unwrap();
    let (a, b) = (tuned.last().unwrap().eval_acc.unwrap(), scratch.last().unwrap().eval_acc.unwrap());
    assert!(a > b, "pretrained {a} vs scratch {b}");
}
