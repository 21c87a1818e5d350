use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Value};

use adaffect::data::{
    binarize_ratings, load_manifest, min_max_normalize, parse_ratings_csv, AffectLabel, Attribute, BinarizeReference,
    FeatureMatrix, Quadrant, RatingMatrix,
};
use adaffect::eeg::{pca_fit, preprocess_epochs, EegEpoch, PreprocessConfig};
use adaffect::eval::{
    ad_level_score, cross_validate, tune_fusion, west_fuse, CvConfig, FusionConfig, ModelSpec, SvmGrid, TrainedModel,
};
use adaffect::io;
use adaffect::learners::{CnnConfig, MtlConfig, Posterior, ShallowHyper, ShallowKind, TaskAssignment};
use adaffect::media::{
    hanjalic_audio, hanjalic_video, sample_keyframes, stft_spectrogram, AudioDescriptorConfig, StftConfig,
    VideoDescriptorConfig, Windowed,
};
use adaffect::schedule::{
    brute_force_schedule, ga_optimize, schedule_csv, AdScore, Anchor, GaConfig, RelevanceWeights, SceneRecord,
    ScheduleProblem,
};
use adaffect::stats::{cohen_kappa, fleiss_kappa, fleiss_tallies, krippendorff_alpha, DistanceMetric};
use adaffect::synth::{
    gen_quadrant_data, gen_rating_matrix, gen_synthetic_eeg, gen_test_media, shuffle_labels, EegGenSpec, GenSpec, Media,
    MediaSpec,
};

use crate::args::*;
use crate::context::{require_dir, require_file, require_output, Context};

fn fmt_value(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

fn expert_cohen(m: &RatingMatrix, expert: &HashMap<&str, AffectLabel>) -> Result<Option<f64>> {
    let labels = binarize_ratings(m, BinarizeReference::PerRaterMean)?;
    let mut kappas = Vec::new();
    for r in 0..m.n_raters() {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (i, id) in m.item_ids().iter().enumerate() {
            if let (Some(l), Some(e)) = (labels[[r, i]], expert.get(id.as_str())) {
                a.push(l);
                b.push(*e);
            }
        }
        if let Ok(k) = cohen_kappa(&a, &b) {
            kappas.push(k.statistic);
        }
    }
    Ok((!kappas.is_empty()).then(|| kappas.iter().sum::<f64>() / kappas.len() as f64))
}

pub fn agreement(ctx: &Context, a: AgreementArgs) -> Result<()> {
    if let Some(out) = &a.out {
        require_output(out)?;
    }
    let (matrices, dataset) = match (&a.ratings, &a.manifest) {
        (Some(path), _) => {
            require_file(path)?;
            let scales: BTreeMap<Attribute, (f64, f64)> =
                [Attribute::Valence, Attribute::Arousal].into_iter().map(|t| (t, t.default_scale())).collect();
            (parse_ratings_csv(path, None, &scales)?, None)
        }
        (None, Some(path)) => {
            require_file(path)?;
            let ds = load_manifest(path)?;
            let mut m = BTreeMap::new();
            for t in [Attribute::Valence, Attribute::Arousal] {
                if let Some(r) = ds.ratings(t) {
                    m.insert(t, r.clone());
                }
            }
            if m.is_empty() {
                bail!("manifest {} references no ratings", path.display());
            }
            (m, Some(ds))
        }
        (None, None) => unreachable!("clap requires one input"),
    };
    let only: Option<Attribute> = a.attribute.map(Into::into);
    let mut text = String::new();
    for (attribute, m) in &matrices {
        if only.is_some_and(|o| o != *attribute) {
            continue;
        }
        let mut line = |method: &str, v: Option<f64>| {
            let _ = writeln!(text, "{method},{attribute},{}", fmt_value(v));
        };
        line(
            "krippendorff_alpha_ordinal",
            krippendorff_alpha(m, DistanceMetric::Ordinal).ok().map(|r| r.statistic),
        );
        line(
            "krippendorff_alpha_interval",
            krippendorff_alpha(m, DistanceMetric::Interval).ok().map(|r| r.statistic),
        );
        for (name, reference) in [
            ("fleiss_kappa_rater_mean", BinarizeReference::PerRaterMean),
            ("fleiss_kappa_group_mean", BinarizeReference::GroupMean),
        ] {
            let labels = binarize_ratings(m, reference)?;
            line(name, fleiss_kappa(&fleiss_tallies(&labels)).ok().map(|r| r.statistic));
        }
        if let Some(ds) = &dataset {
            let expert: HashMap<&str, AffectLabel> =
                ds.records.iter().map(|r| (r.id.as_str(), r.expert_quadrant.label(*attribute))).collect();
            line("cohen_kappa_expert_mean", expert_cohen(m, &expert)?);
        }
    }
    if text.is_empty() {
        bail!("no ratings for the requested attribute");
    }
    print!("{text}");
    if let Some(out) = &a.out {
        let settings = json!({
            "ratings": a.ratings.as_ref().map(|p| p.display().to_string()),
            "manifest": a.manifest.as_ref().map(|p| p.display().to_string()),
            "attribute": only.map(|t| t.name()),
        });
        ctx.emit("agreement", out, text.as_bytes(), settings)?;
    }
    Ok(())
}

pub fn extract_av(ctx: &Context, a: ExtractArgs) -> Result<()> {
    require_output(&a.out)?;
    let window: adaffect::media::TemporalWindow = a.window.into();
    let (text, settings) = match (&a.audio, &a.frames, a.output) {
        (Some(path), _, AvOutput::Descriptors) => {
            require_file(path)?;
            let cfg = ctx.section("audio", AudioDescriptorConfig::default())?;
            let clip = io::read_wav(path)?;
            let series = hanjalic_audio(&clip.to_mono(), &cfg)?.temporal_window(window);
            (io::descriptor_csv(&series), json!({"audio": cfg, "window": window}))
        }
        (Some(path), _, AvOutput::Spectrogram) => {
            require_file(path)?;
            let cfg = ctx.section("stft", StftConfig::default())?;
            let clip = io::read_wav(path)?;
            let sg = stft_spectrogram(&clip.to_mono(), &cfg)?;
            (io::spectrogram_csv(&sg), json!({"stft": cfg}))
        }
        (Some(_), _, AvOutput::Keyframes) => bail!("keyframes need --frames"),
        (None, Some(dir), output) => {
            require_dir(dir)?;
            let seq = io::read_frames(dir)?;
            match output {
                AvOutput::Descriptors => {
                    let cfg = ctx.section("video", VideoDescriptorConfig::default())?;
                    let series = hanjalic_video(&seq, &cfg)?.temporal_window(window);
                    (io::descriptor_csv(&series), json!({"video": cfg, "window": window}))
                }
                AvOutput::Keyframes => {
                    let mut text = String::from("keyframe,frame_index,time_s\n");
                    for (k, i) in sample_keyframes(&seq, a.keyframe_period).into_iter().enumerate() {
                        let _ = writeln!(text, "{k},{i},{}", i as f64 / seq.frame_rate());
                    }
                    (text, json!({"keyframe_period_s": a.keyframe_period}))
                }
                AvOutput::Spectrogram => bail!("spectrograms need --audio"),
            }
        }
        (None, None, _) => unreachable!("clap requires one input"),
    };
    ctx.emit("extract-av", &a.out, text.as_bytes(), settings)
}

#[derive(Debug, Deserialize)]
struct LabelRow {
    stimulus_id: String,
    label: String,
    quadrant: String,
}

fn read_epoch_labels(path: &Path) -> Result<HashMap<String, (AffectLabel, Quadrant)>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = HashMap::new();
    for (i, row) in reader.deserialize::<LabelRow>().enumerate() {
        let row = row.with_context(|| format!("{} line {}", path.display(), i + 2))?;
        let label: AffectLabel = row.label.parse()?;
        let quadrant: Quadrant = row.quadrant.parse()?;
        out.insert(row.stimulus_id, (label, quadrant));
    }
    Ok(out)
}

fn epoch_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "bin"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .bin epochs in {}", dir.display());
    }
    Ok(paths)
}

pub fn preprocess_eeg(ctx: &Context, a: PreprocessArgs) -> Result<()> {
    require_dir(&a.input)?;
    require_file(&a.labels)?;
    require_output(&a.out)?;
    if !(0.0..=1.0).contains(&a.retain) {
        bail!("--retain must lie in [0, 1]");
    }
    let cfg = ctx.section(
        "preprocess",
        PreprocessConfig {
            window: a.window.into(),
            clean_only: a.clean_only,
            ..PreprocessConfig::default()
        },
    )?;
    let labels = read_epoch_labels(&a.labels)?;
    let epochs: Vec<EegEpoch> = epoch_paths(&a.input)?
        .iter()
        .map(|p| io::read_eeg(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<_>>()?;
    let (rows, kept) = preprocess_epochs(&epochs, &cfg)?;
    let mut ids = Vec::with_capacity(kept.len());
    let mut ys = Vec::with_capacity(kept.len());
    let mut tasks = Vec::with_capacity(kept.len());
    for &i in &kept {
        let id = epochs[i].stimulus_id();
        let (l, q) = labels.get(id).ok_or_else(|| anyhow!("no label for epoch `{id}`"))?;
        ids.push(id.to_string());
        ys.push(*l);
        tasks.push(*q);
    }
    let (rows, pca) = if a.retain > 0.0 {
        let model = pca_fit(rows.view(), a.retain)?;
        (model.apply(rows.view())?, Some((model.k(), model.retained_fraction)))
    } else {
        (rows, None)
    };
    let x = FeatureMatrix::new(rows, ys, tasks, ids)?;
    let settings = json!({
        "preprocess": cfg,
        "epochs_read": epochs.len(),
        "epochs_kept": kept.len(),
        "pca_retain": a.retain,
        "pca_components": pca.map(|p| p.0),
        "pca_retained_fraction": pca.map(|p| p.1),
    });
    ctx.emit("preprocess-eeg", &a.out, io::features_csv(&x).as_bytes(), settings)
}

fn model_spec(ctx: &Context, kind: ModelKind, assignment: AssignmentArg, no_grid: bool) -> Result<ModelSpec> {
    let shallow = |kind: ShallowKind| -> Result<ModelSpec> {
        let grid = match (kind, no_grid) {
            (ShallowKind::Lda, _) | (_, true) => None,
            _ => Some(ctx.section("svm_grid", SvmGrid::default())?),
        };
        Ok(ModelSpec::Shallow {
            kind,
            hyper: ctx.section("shallow", ShallowHyper::default())?,
            grid,
        })
    };
    Ok(match kind {
        ModelKind::Lda => shallow(ShallowKind::Lda)?,
        ModelKind::LinearSvm => shallow(ShallowKind::LinearSvm)?,
        ModelKind::RbfSvm => shallow(ShallowKind::RbfSvm)?,
        ModelKind::Mtl => ModelSpec::Mtl {
            config: ctx.section("mtl", MtlConfig::default())?,
            assignment: match assignment {
                AssignmentArg::Known => TaskAssignment::Known,
                AssignmentArg::MaxScore => TaskAssignment::MaxScore,
            },
        },
        ModelKind::Cnn => ModelSpec::Cnn {
            config: ctx.section(
                "cnn",
                CnnConfig {
                    seed: ctx.seed,
                    ..CnnConfig::default()
                },
            )?,
        },
    })
}

pub fn train(ctx: &Context, a: TrainArgs) -> Result<()> {
    require_file(&a.features)?;
    require_output(&a.out)?;
    let spec = model_spec(ctx, a.model.model, a.model.assignment, a.model.no_grid)?;
    let x = io::read_features(&a.features)?;
    let model = spec.fit(&x, ctx.seed)?;
    let settings = json!({"features": a.features.display().to_string(), "model": spec});
    ctx.emit("train", &a.out, io::model_json(&model)?.as_bytes(), settings)
}

pub fn evaluate(ctx: &Context, a: EvaluateArgs) -> Result<()> {
    require_file(&a.features)?;
    require_output(&a.out)?;
    let mut x = io::read_features(&a.features)?;
    if a.shuffle_labels {
        x = shuffle_labels(&x, ctx.seed)?;
    }
    if let Some(path) = &a.trained {
        require_file(path)?;
        let model: TrainedModel = io::load_model(path)?;
        let p = model.predict_proba(&x)?;
        let settings = json!({"trained": path.display().to_string(), "model": model.name(), "shuffle_labels": a.shuffle_labels});
        return ctx.emit("evaluate", &a.out, io::posteriors_csv(x.item_ids(), &p)?.as_bytes(), settings);
    }
    let kind = a.model.expect("clap requires --model or --trained");
    let spec = model_spec(ctx, kind, a.assignment, a.no_grid)?;
    let mut cv = ctx.section("cv", CvConfig::default())?;
    cv.seed = ctx.seed;
    cv.reps = a.reps.unwrap_or(cv.reps);
    cv.folds = a.folds.unwrap_or(cv.folds);
    cv.setting = a.setting.clone().unwrap_or_else(|| {
        if cv.setting.is_empty() {
            spec.name().to_string()
        } else {
            cv.setting.clone()
        }
    });
    let report = cross_validate(&x, &spec, &cv)?;
    let settings = json!({
        "features": a.features.display().to_string(),
        "model": spec,
        "cv": cv,
        "shuffle_labels": a.shuffle_labels,
        "mean": report.mean,
        "std": report.std,
    });
    ctx.emit("evaluate", &a.out, report.to_csv().as_bytes(), settings)
}

fn read_aligned(p1: &Path, p2: &Path) -> Result<(Vec<String>, Vec<Posterior>, Vec<Posterior>)> {
    require_file(p1)?;
    require_file(p2)?;
    let (ids1, a) = io::read_posteriors(p1)?;
    let (ids2, b) = io::read_posteriors(p2)?;
    if ids1 != ids2 {
        bail!("{} and {} list different items", p1.display(), p2.display());
    }
    Ok((ids1, a, b))
}

fn truth_for(path: &Path, ids: &[String]) -> Result<Vec<AffectLabel>> {
    require_file(path)?;
    let x = io::read_features(path)?;
    let by_id: HashMap<&str, AffectLabel> = x.item_ids().iter().map(String::as_str).zip(x.labels().iter().copied()).collect();
    ids.iter()
        .map(|id| by_id.get(id.as_str()).copied().ok_or_else(|| anyhow!("no true label for `{id}` in {}", path.display())))
        .collect()
}

pub fn fuse(ctx: &Context, a: FuseArgs) -> Result<()> {
    require_output(&a.out)?;
    let (ids, p1, p2) = read_aligned(&a.p1, &a.p2)?;
    let mut cfg = ctx.section("fusion", FusionConfig::default())?;
    cfg.leaky |= a.leaky;
    let f1 = [a.f1, a.f2];
    let (alphas, tuned_f1) = match (&a.alphas, &a.tune_p1, cfg.leaky) {
        (Some(v), _, _) => match v[..] {
            [a1, a2] => ([a1, a2], None),
            _ => bail!("--alphas takes exactly two comma-separated weights, got {}", v.len()),
        },
        (None, Some(t1), _) => {
            let t2 = a.tune_p2.as_ref().expect("clap requires --tune-p2");
            let (tids, q1, q2) = read_aligned(t1, t2)?;
            let truth = truth_for(a.tune_truth.as_ref().expect("clap requires --tune-truth"), &tids)?;
            let t = tune_fusion(&q1, &q2, &truth, f1, &cfg)?;
            (t.alphas, Some(t.f1))
        }
        (None, None, true) => {
            let truth = truth_for(a.truth.as_ref().ok_or_else(|| anyhow!("leaky tuning needs --truth"))?, &ids)?;
            let t = tune_fusion(&p1, &p2, &truth, f1, &cfg)?;
            (t.alphas, Some(t.f1))
        }
        (None, None, false) => bail!("give --alphas, a tuning set (--tune-p1/--tune-p2/--tune-truth) or --leaky --truth"),
    };
    let (_, scores) = west_fuse(&p1, &p2, a.f1, a.f2, alphas)?;
    let fused: Vec<Posterior> = scores.iter().map(|s| s.normalized()).collect();
    let settings = json!({
        "fusion": cfg,
        "train_f1": f1,
        "alphas": alphas,
        "tuning_f1": tuned_f1,
    });
    ctx.emit("fuse", &a.out, io::posteriors_csv(&ids, &fused)?.as_bytes(), settings)
}

/// Mean High posterior per ad; ids `ad:segment` group under `ad`. Ads keep
/// first-appearance order.
fn ad_means(path: &Path) -> Result<Vec<(String, f64)>> {
    require_file(path)?;
    let (ids, p) = io::read_posteriors(path)?;
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<f64>> = HashMap::new();
    for (id, q) in ids.iter().zip(&p) {
        let ad = id.split_once(':').map_or(id.as_str(), |(ad, _)| ad).to_string();
        groups
            .entry(ad.clone())
            .or_insert_with(|| {
                order.push(ad);
                Vec::new()
            })
            .push(q.high);
    }
    order
        .into_iter()
        .map(|ad| {
            let s = ad_level_score(&groups[&ad])?;
            Ok((ad, s))
        })
        .collect()
}

pub fn score_ads(ctx: &Context, a: ScoreAdsArgs) -> Result<()> {
    require_output(&a.out)?;
    let asl = ad_means(&a.arousal)?;
    let val = ad_means(&a.valence)?;
    let val_by: HashMap<&str, f64> = val.iter().map(|(id, v)| (id.as_str(), *v)).collect();
    if asl.len() != val.len() {
        bail!("arousal and valence files cover different ads");
    }
    let mut asl_v = Vec::new();
    let mut val_v = Vec::new();
    for (id, v) in &asl {
        asl_v.push(*v);
        val_v.push(*val_by.get(id.as_str()).ok_or_else(|| anyhow!("ad `{id}` missing from valence file"))?);
    }
    if !a.no_normalize {
        asl_v = min_max_normalize(&asl_v)?;
        val_v = min_max_normalize(&val_v)?;
    }
    let ads: Vec<AdScore> = asl
        .iter()
        .zip(asl_v.iter().zip(&val_v))
        .map(|((id, _), (&asl, &val))| AdScore { id: id.clone(), asl, val })
        .collect();
    let text = serde_json::to_string_pretty(&ads)? + "\n";
    ctx.emit("score-ads", &a.out, text.as_bytes(), json!({"normalized": !a.no_normalize, "ads": ads.len()}))
}

pub fn schedule(ctx: &Context, a: ScheduleArgs) -> Result<()> {
    require_file(&a.scenes)?;
    require_file(&a.ads)?;
    require_output(&a.out)?;
    let weights = RelevanceWeights {
        valence: a.lambda_val,
        arousal: a.lambda_asl,
    };
    let anchor = match a.anchor {
        AnchorArg::Preceding => Anchor::Preceding,
        AnchorArg::Following => Anchor::Following,
    };
    let p = ScheduleProblem::new(io::read_scenes(&a.scenes)?, io::read_ads(&a.ads)?, a.k, weights, anchor)?;
    let (schedule, fitness, settings) = match a.method {
        Method::Exact => {
            let (s, f) = brute_force_schedule(&p)?;
            (s, f, json!({"method": "exact"}))
        }
        Method::Ga => {
            let mut cfg = ctx.section("ga", GaConfig::default())?;
            cfg.seed = ctx.seed;
            let r = ga_optimize(&p, &cfg)?;
            (r.schedule, r.fitness, json!({"method": "ga", "ga": cfg}))
        }
    };
    let settings = json!({
        "search": settings,
        "k": a.k,
        "anchor": anchor,
        "weights": weights,
        "fitness": fitness,
        "upper_bound": p.upper_bound(),
    });
    ctx.emit("schedule", &a.out, schedule_csv(&p, &schedule)?.as_bytes(), settings)
}

fn ratings_csv(matrices: &[RatingMatrix]) -> String {
    let mut out = String::from("rater_id,item_id,attribute,score\n");
    for m in matrices {
        for ((r, i), v) in m.values().indexed_iter() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                m.rater_ids()[r],
                m.item_ids()[i],
                m.attribute(),
                v.map_or(String::new(), |v| v.to_string())
            );
        }
    }
    out
}

/// Expert label: item mean rating above the scale midpoint.
fn expert_label(m: &RatingMatrix, item: usize) -> &'static str {
    let (lo, hi) = m.scale();
    let mean = m.item_means()[item].unwrap_or(lo);
    AffectLabel::from_score(mean - (lo + hi) / 2.0).code()
}

pub fn synth(ctx: &Context, a: SynthArgs) -> Result<()> {
    match a.kind {
        SynthKind::Quadrant {
            n_per_task,
            dims,
            separation,
            correlation,
            noise,
            out,
        } => {
            require_output(&out)?;
            let mut spec = ctx.section("quadrant", GenSpec::default())?;
            spec.seed = ctx.seed;
            spec.n_per_task = n_per_task.unwrap_or(spec.n_per_task);
            spec.dims = dims.unwrap_or(spec.dims);
            spec.class_separation = separation.unwrap_or(spec.class_separation);
            spec.task_correlation = correlation.unwrap_or(spec.task_correlation);
            spec.noise_std = noise.unwrap_or(spec.noise_std);
            let x = gen_quadrant_data(&spec)?;
            ctx.emit("synth quadrant", &out, io::features_csv(&x).as_bytes(), json!({"quadrant": spec}))
        }
        SynthKind::Eeg {
            epochs,
            samples,
            snr,
            dirty_fraction,
            out,
        } => {
            require_output(&out)?;
            let mut spec = ctx.section("eeg", EegGenSpec::default())?;
            spec.seed = ctx.seed;
            spec.epochs = epochs.unwrap_or(spec.epochs);
            spec.samples = samples.unwrap_or(spec.samples);
            spec.snr = snr.unwrap_or(spec.snr);
            spec.dirty_fraction = dirty_fraction.unwrap_or(spec.dirty_fraction);
            let data = gen_synthetic_eeg(&spec)?;
            std::fs::create_dir_all(&out)?;
            let mut labels = String::from("stimulus_id,label,quadrant\n");
            for (i, (e, l)) in data.iter().enumerate() {
                io::write_eeg(&out.join(format!("epoch_{i:04}.bin")), e)?;
                let other = if (i / 2) % 2 == 0 { AffectLabel::High } else { AffectLabel::Low };
                let _ = writeln!(labels, "{},{l},{}", e.stimulus_id(), Quadrant::new(*l, other));
            }
            io::write_atomic(&out.join("labels.csv"), labels.as_bytes())?;
            ctx.write_meta("synth eeg", &out, json!({"eeg": spec}))
        }
        SynthKind::Ratings {
            raters,
            items,
            agreement,
            manifest,
            out,
        } => {
            require_output(&out)?;
            if let Some(m) = &manifest {
                require_output(m)?;
            }
            let val = gen_rating_matrix(raters, items, agreement, ctx.seed, Attribute::Valence)?;
            let asl = gen_rating_matrix(raters, items, agreement, ctx.seed.wrapping_add(1), Attribute::Arousal)?;
            let settings = json!({"raters": raters, "items": items, "agreement": agreement});
            ctx.emit("synth ratings", &out, ratings_csv(&[val.clone(), asl.clone()]).as_bytes(), settings.clone())?;
            if let Some(mpath) = manifest {
                let rel = relative_to(&out, &mpath);
                let mut text = serde_json::to_string(&json!({
                    "ratings": rel,
                    "scales": {"valence": [-2.0, 2.0], "arousal": [0.0, 4.0]},
                }))? + "\n";
                let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
                for (i, id) in val.item_ids().iter().enumerate() {
                    let duration: f64 = (rng.random_range(200..=700) as f64) / 10.0;
                    let line = json!({
                        "id": id,
                        "duration_s": duration,
                        "expert_arousal": expert_label(&asl, i),
                        "expert_valence": expert_label(&val, i),
                    });
                    text += &(serde_json::to_string(&line)? + "\n");
                }
                ctx.emit("synth ratings", &mpath, text.as_bytes(), settings)?;
            }
            Ok(())
        }
        SynthKind::Media {
            kind,
            freq,
            end_freq,
            sample_rate,
            seconds,
            frames,
            cut_at,
            fps,
            width,
            height,
            out,
        } => {
            require_output(&out)?;
            let spec = match kind {
                MediaKind::Tone => MediaSpec::Tone {
                    freq_hz: freq,
                    sample_rate,
                    seconds,
                    amplitude: 0.5,
                },
                MediaKind::Sweep => MediaSpec::Sweep {
                    start_hz: freq,
                    end_hz: end_freq,
                    sample_rate,
                    seconds,
                },
                MediaKind::CutSequence => MediaSpec::CutSequence {
                    frames,
                    cut_at,
                    fps,
                    width,
                    height,
                },
                MediaKind::StaticSequence => MediaSpec::StaticSequence { frames, fps, width, height },
            };
            match gen_test_media(&spec)? {
                Media::Audio(clip) => io::write_wav(&out, &clip)?,
                Media::Video(seq) => io::write_frames(&out, &seq)?,
            }
            ctx.write_meta("synth media", &out, json!({"media": spec}))
        }
        SynthKind::Scenes { count, prefix, out } => {
            require_output(&out)?;
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
            let scenes: Vec<SceneRecord> = (0..count)
                .map(|i| SceneRecord {
                    id: format!("{prefix}{i:03}"),
                    asl: rng.random(),
                    val: rng.random(),
                })
                .collect();
            let text = serde_json::to_string_pretty(&scenes)? + "\n";
            ctx.emit("synth scenes", &out, text.as_bytes(), json!({"count": count, "prefix": prefix}))
        }
    }
}

/// `target` as written from the directory holding `from`, when they share
/// it; otherwise the absolute path.
fn relative_to(target: &Path, from: &Path) -> Value {
    let dir = from.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let tdir = target.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if dir == tdir {
        json!(target.file_name().map(|n| n.to_string_lossy().into_owned()))
    } else {
        json!(std::fs::canonicalize(target).unwrap_or_else(|_| target.to_path_buf()).display().to_string())
    }
}
