mod common;

use std::fs;
use std::path::PathBuf;

use common::toy_images;
use ecgscalo::dataset::ClassLabel;
use ecgscalo::models::*;
use ecgscalo::nn::Mode;
use ecgscalo::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/backbone_s7.ckpt")
}

fn conv(k: usize, cin: usize, f: usize) -> usize {
    k * k * cin * f + f
}

fn dense(i: usize, o: usize) -> usize {
    i * o + o
}

fn params(net: &ecgscalo::nn::Network<f32>) -> Vec<Vec<f32>> {
    net.named_arrays().into_iter().map(|(_, t)| t.data().to_vec()).collect()
}

fn frozen_params(net: &ecgscalo::nn::Network<f32>) -> Vec<Vec<f32>> {
    net.slots
        .iter()
        .filter(|s| s.frozen)
        .flat_map(|s| s.layer.params().into_iter().map(|p| p.value.data().to_vec()))
        .collect()
}

fn quick(epochs: usize, lr: f64) -> TrainConfig {
    TrainConfig {
        epochs,
        learning_rate: lr,
        seed: 3,
        validation_fraction: 0.0,
        ..TrainConfig::for_profile(ModelProfile::Ensemble)
    }
}

#[test]
fn custom_cnn_parameter_count() {
    let mut expect = 0;
    let mut cin = 3;
    for f in [16, 32, 64, 128] {
        expect += conv(3, cin, f) + 2 * f;
        cin = f;
    }
    expect += dense(14 * 14 * 128, 64) + dense(64, 3);
    assert_eq!(build_custom_cnn().param_count(), expect);
    let clf = Classifier::new(ModelProfile::CustomCnn, 0, 0).unwrap();
    assert_eq!(clf.param_count(), expect);
    assert_eq!(clf.trainable_param_count(), expect);
}

#[test]
fn head_parameter_counts() {
    let count =
        |layers: Vec<LayerSpec>, c: usize| ecgscalo::models::spec::fragment_param_count(&layers, &[7, 7, c]).unwrap();
    assert_eq!(
        count(build_head(512, HeadVariant::VggStyle).unwrap(), 512),
        dense(512, 256) + dense(256, 64) + dense(64, 3)
    );
    assert_eq!(
        count(build_head(1536, HeadVariant::InceptionStyle).unwrap(), 1536),
        dense(1536, 3)
    );
    assert!(build_head(0, HeadVariant::VggStyle).is_err());
}

#[test]
fn ensemble_member_layout() {
    let clf = Classifier::new(ModelProfile::Ensemble, 1, 2).unwrap();
    assert_eq!(clf.members.len(), 3);
    let mut backbone = 0;
    let mut cin = 3;
    for f in [8, 16, 32] {
        backbone += conv(3, cin, f);
        cin = f;
    }
    let heads = 2 * (dense(32, 256) + dense(256, 64) + dense(64, 3)) + dense(32, 3);
    assert_eq!(clf.param_count(), 3 * backbone + heads);
    assert_eq!(clf.trainable_param_count(), heads);
}

#[test]
fn forward_shape_and_rows() {
    let (imgs, _) = toy_images(1);
    for profile in [ModelProfile::CustomCnn, ModelProfile::Ensemble] {
        let mut clf = Classifier::new(profile, 5, 5).unwrap();
        let preds = clf.predict_batch(&imgs[..3]).unwrap();
        assert_eq!(preds.len(), 3);
        for p in preds {
            assert!((p.0.iter().sum::<f64>() - 1.0).abs() < 1e-5);
            assert!(p.0.iter().all(|v| *v >= 0.0));
        }
        let mut net = clf.members[0].clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = net.forward(&image_tensor(&imgs[0]), Mode::Infer, &mut rng).unwrap();
        assert_eq!(out.shape(), &[1, 3]);
    }
}

#[test]
fn digest_is_stable_and_discriminating() {
    let a = ClassifierSpec::for_profile(ModelProfile::Ensemble);
    assert_eq!(a.digest(), ClassifierSpec::for_profile(ModelProfile::Ensemble).digest());
    assert_ne!(
        a.digest(),
        ClassifierSpec::for_profile(ModelProfile::CustomCnn).digest()
    );
    assert_eq!(build_custom_cnn().digest(), build_custom_cnn().digest());
    let mut other = build_custom_cnn();
    other.layers[0].kind = LayerKind::Conv {
        kernel: 5,
        filters: 16,
        stride: 1,
        same: true,
    };
    assert_ne!(other.digest(), build_custom_cnn().digest());
}

#[test]
fn frozen_layers_do_not_move() {
    let (imgs, labels) = toy_images(2);
    let mut clf = Classifier::new(ModelProfile::Ensemble, 7, 8).unwrap();
    let before: Vec<_> = clf.members.iter().map(frozen_params).collect();
    let heads_before: Vec<_> = clf.members.iter().map(params).collect();
    clf.train(&imgs, &labels, &quick(2, 1e-2)).unwrap();
    let after: Vec<_> = clf.members.iter().map(frozen_params).collect();
    assert_eq!(before, after);
    assert_ne!(heads_before, clf.members.iter().map(params).collect::<Vec<_>>());
}

#[test]
fn zero_learning_rate_changes_nothing() {
    let (imgs, labels) = toy_images(3);
    let mut clf = Classifier::new(ModelProfile::Ensemble, 1, 1).unwrap();
    let before: Vec<_> = clf.members.iter().map(params).collect();
    let history = clf.train(&imgs, &labels, &quick(1, 0.0)).unwrap();
    assert_eq!(history.rows.len(), 1);
    assert_eq!(before, clf.members.iter().map(params).collect::<Vec<_>>());
}

#[test]
fn toy_loss_settles() {
    let (imgs, labels) = toy_images(4);
    let mut clf = Classifier::new(ModelProfile::Ensemble, 2, 2).unwrap();
    let history = clf.train(&imgs, &labels, &quick(15, 1e-3)).unwrap();
    let losses: Vec<f64> = history.rows.iter().map(|r| r.train_loss).collect();
    assert_eq!(losses.len(), 15);
    for pair in losses[4..].windows(2) {
        assert!(pair[1] <= pair[0] + 0.01, "{losses:?}");
    }
    assert!(losses[14] < losses[0]);
}

#[test]
fn save_load_predicts_identically() {
    let dir = tempfile::tempdir().unwrap();
    let (imgs, labels) = toy_images(5);
    let mut clf = Classifier::new(ModelProfile::Ensemble, 3, 4).unwrap();
    clf.train(&imgs, &labels, &quick(2, 1e-2)).unwrap();
    let path = dir.path().join("model.ckpt");
    clf.save(&path).unwrap();
    let mut back = Classifier::load(ModelProfile::Ensemble, &path).unwrap();
    assert_eq!(back.to_checkpoint().encode(), fs::read(&path).unwrap());
    for (a, b) in clf
        .predict_batch(&imgs)
        .unwrap()
        .iter()
        .zip(back.predict_batch(&imgs).unwrap())
    {
        assert_eq!(a.0, b.0);
    }

    let bytes = fs::read(&path).unwrap();
    let cut = dir.path().join("cut.ckpt");
    fs::write(&cut, &bytes[..bytes.len() - 9]).unwrap();
    assert!(matches!(
        Classifier::load(ModelProfile::Ensemble, &cut),
        Err(Error::CorruptCheckpoint(_))
    ));
    assert!(Classifier::load(ModelProfile::CustomCnn, &path).is_err());
    assert!(Classifier::load(ModelProfile::Ensemble, &dir.path().join("none.ckpt")).is_err());
}

#[test]
fn backbone_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let src = Classifier::new(ModelProfile::Ensemble, 11, 0).unwrap();
    let path = dir.path().join("bb.ckpt");
    src.save_backbone(&path).unwrap();
    let mut dst = Classifier::new(ModelProfile::Ensemble, 12, 0).unwrap();
    assert_ne!(frozen_params(&dst.members[0]), frozen_params(&src.members[0]));
    dst.load_backbone_file(&path).unwrap();
    for (a, b) in dst.members.iter().zip(&src.members) {
        assert_eq!(frozen_params(a), frozen_params(b));
    }
    assert!(dst.load_backbone(&src.to_checkpoint()).is_err());
}

#[test]
fn backbone_matches_fixture() {
    let current = Classifier::new(ModelProfile::Ensemble, 7, 0)
        .unwrap()
        .backbone_checkpoint()
        .encode();
    assert_eq!(
        current,
        fs::read(fixture()).expect("fixture present; run the ignored writer")
    );
}

#[test]
#[ignore]
fn write_backbone_fixture() {
    let clf = Classifier::new(ModelProfile::Ensemble, 7, 0).unwrap();
    fs::create_dir_all(fixture().parent().unwrap()).unwrap();
    clf.save_backbone(&fixture()).unwrap();
}

#[test]
fn class_count_matches_labels() {
    assert_eq!(ecgscalo::models::spec::NUM_CLASSES, ClassLabel::ALL.len());
}
