use adaffect::data::{AffectLabel, Attribute, FeatureMatrix};
use adaffect::eeg::{pca_fit, preprocess_epochs, PreprocessConfig, CHANNELS};
use adaffect::eval::{f1_score, ModelSpec};
use adaffect::io;
use adaffect::learners::{cnn_train, CnnConfig};
use adaffect::media::{hanjalic_video, stft_spectrogram, StftConfig, TemporalWindow, VideoDescriptorConfig};
use adaffect::synth::{gen_quadrant_data, gen_rating_matrix, gen_synthetic_eeg, gen_test_media, EegGenSpec, GenSpec, Media, MediaSpec};
use ndarray::Axis;

fn eeg_features(snr: f64, seed: u64) -> FeatureMatrix {
    let spec = EegGenSpec { seed, epochs: 80, snr, ..EegGenSpec::default() };
    let data = gen_synthetic_eeg(&spec).unwrap();
    let epochs: Vec<_> = data.iter().map(|(e, _)| e.clone()).collect();
    let cfg = PreprocessConfig { window: TemporalWindow::All, ..PreprocessConfig::default() };
    let (rows, kept) = preprocess_epochs(&epochs, &cfg).unwrap();
    let pca = pca_fit(rows.view(), 0.9).unwrap();
    let z = pca.apply(rows.view()).unwrap();
    let labels: Vec<AffectLabel> = kept.iter().map(|&i| data[i].1).collect();
    let tasks = labels.iter().map(|&l| adaffect::data::Quadrant::new(l, l)).collect();
    let ids = kept.iter().map(|&i| epochs[i].stimulus_id().to_string()).collect();
    FeatureMatrix::new(z, labels, tasks, ids).unwrap()
}

fn split_test_f1(x: &FeatureMatrix) -> f64 {
    let train: Vec<usize> = (0..x.len()).filter(|i| i % 4 < 2).collect();
    let test: Vec<usize> = (0..x.len()).filter(|i| i % 4 >= 2).collect();
    let tr = x.select(&train);
    let te = x.select(&test);
    let (model, _) = cnn_train(tr.rows().view(), tr.labels(), &CnnConfig { seed: 3, ..CnnConfig::default() }).unwrap();
    let pred: Vec<AffectLabel> = model.predict_proba(te.rows().view()).unwrap().iter().map(|p| p.label()).collect();
    f1_score(&pred, te.labels(), AffectLabel::High).unwrap()
}

#[test]
fn strong_band_power_is_learnable_end_to_end() {
    let f1 = split_test_f1(&eeg_features(10.0, 5));
    assert!(f1 >= 0.9, "test F1 {f1}");
}

#[test]
fn pure_noise_eeg_is_at_chance() {
    let mean = (1..=4).map(|seed| split_test_f1(&eeg_features(0.0, seed))).sum::<f64>() / 4.0;
    assert!((mean - 0.5).abs() <= 0.1, "mean F1 {mean}");
}

#[test]
fn eeg_files_roundtrip_through_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_synthetic_eeg(&EegGenSpec { epochs: 3, samples: 200, dirty_fraction: 0.34, ..EegGenSpec::default() }).unwrap();
    for (i, (e, _)) in data.iter().enumerate() {
        let p = dir.path().join(format!("e{i}.bin"));
        io::write_eeg(&p, e).unwrap();
        let back = io::read_eeg(&p).unwrap();
        assert_eq!(back.data().dim(), (CHANNELS, 200));
        assert_eq!(back.baseline().unwrap().dim(), (CHANNELS, 128));
        assert_eq!(back.is_clean(), e.is_clean());
        assert_eq!(back.stimulus_id(), e.stimulus_id());
        let err = (back.data() - e.data()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-4 * e.data().iter().fold(1.0f64, |m, v| m.max(v.abs())));
        let side: io::EegSidecar = serde_json::from_str(&std::fs::read_to_string(io::eeg_sidecar_path(&p)).unwrap()).unwrap();
        assert_eq!((side.channels, side.sample_rate, side.samples, side.baseline_offset), (14, 128.0, 200, 128));
    }
    assert!(!data[0].0.is_clean());
}

#[test]
fn feature_csv_roundtrip_is_exact() {
    let x = gen_quadrant_data(&GenSpec { dims: 4, n_per_task: 5, ..GenSpec::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.csv");
    io::write_features(&p, &x).unwrap();
    assert_eq!(io::read_features(&p).unwrap(), x);
}

#[test]
fn saved_models_predict_identically() {
    let x = gen_quadrant_data(&GenSpec { dims: 8, n_per_task: 12, ..GenSpec::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for spec in [ModelSpec::lda(), ModelSpec::svm(adaffect::learners::ShallowKind::RbfSvm), ModelSpec::mtl(), ModelSpec::cnn()] {
        let m = spec.fit(&x, 4).unwrap();
        let p = dir.path().join(format!("{}.json", spec.name()));
        io::save_model(&p, &m).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(doc["format_version"], io::MODEL_FORMAT_VERSION);
        let back = io::load_model(&p).unwrap();
        assert_eq!(back.predict_proba(&x).unwrap(), m.predict_proba(&x).unwrap(), "{}", spec.name());
    }
}

#[test]
fn wav_and_frames_feed_extractors() {
    let dir = tempfile::tempdir().unwrap();
    let Media::Audio(tone) = gen_test_media(&MediaSpec::Tone { freq_hz: 1000.0, sample_rate: 16000, seconds: 2.0, amplitude: 0.5 }).unwrap() else {
        panic!("tone is audio")
    };
    let wav = dir.path().join("t.wav");
    io::write_wav(&wav, &tone).unwrap();
    let back = io::read_wav(&wav).unwrap();
    let sg = stft_spectrogram(&back, &StftConfig::default()).unwrap();
    assert!(sg.peak_bins().iter().all(|&b| b == 40));

    let Media::Video(seq) = gen_test_media(&MediaSpec::CutSequence { frames: 100, cut_at: 50, fps: 25.0, width: 8, height: 6 }).unwrap() else {
        panic!("cut sequence is video")
    };
    let frames = dir.path().join("frames");
    io::write_frames(&frames, &seq).unwrap();
    let back = io::read_frames(&frames).unwrap();
    assert_eq!(back.len(), 100);
    let d = hanjalic_video(&back, &VideoDescriptorConfig::default()).unwrap();
    assert_eq!(d.column("shot_changes").unwrap(), vec![0.0, 0.0, 1.0, 0.0]);
}

#[test]
fn rating_generator_agreement_is_monotone() {
    use adaffect::stats::{krippendorff_alpha, DistanceMetric};
    let mean_alpha = |level: f64| {
        (0..10)
            .map(|s| krippendorff_alpha(&gen_rating_matrix(8, 30, level, s, Attribute::Arousal).unwrap(), DistanceMetric::Ordinal).unwrap().statistic)
            .sum::<f64>()
            / 10.0
    };
    assert!(mean_alpha(0.9) > mean_alpha(0.3));
    let null: Vec<f64> = (0..20)
        .map(|s| krippendorff_alpha(&gen_rating_matrix(6, 30, 0.0, 100 + s, Attribute::Valence).unwrap(), DistanceMetric::Interval).unwrap().statistic)
        .collect();
    let m = null.iter().sum::<f64>() / 20.0;
    assert!(m.abs() <= 0.15, "null alpha {m}");
}

#[test]
fn generated_labels_match_noiseless_projection() {
    let spec = GenSpec { noise_std: 0.0, ..GenSpec::default() };
    let full = adaffect::synth::gen_quadrant_data_full(&spec).unwrap();
    let x = &full.features;
    for (i, row) in x.rows().axis_iter(Axis(0)).enumerate() {
        let t = x.tasks()[i].index();
        let s = full.weights.column(t).dot(&(&row - &full.centres.column(t)));
        assert_eq!(AffectLabel::from_score(s), x.labels()[i]);
        assert!((s - full.projections[i]).abs() < 1e-9);
    }
}
