use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Prompt};
use super::train::{evaluate_items, train_network, EvalItem, RunRecord, TrainItem, TrainSettings};
use crate::curves::emit_curves;
use crate::data::{
    derive_seed, fp_fn_rates, inject_noise_for, load_dataset, save_pseudo_labels, split_dataset, write_manifest,
    BBox, DatasetManifest, LabelSource, PseudoLabel, SegSample, Split,
};
use crate::error::{Error, Result};
use crate::metrics::{f_measure, iou_score, mae_metric, MetricReport, Threshold, BETA2};
use crate::model::{save_checkpoint, NetKind, Network};
use crate::tensor::Tensor;

/// Progress sink; receives one human-readable line per event.
pub type Log<'a> = &'a mut dyn FnMut(String);

fn prompt_box(prompt: Prompt, s: &SegSample) -> BBox {
    match prompt {
        Prompt::Box => s.bbox,
        Prompt::ImageOnly => {
            let (_, h, w) = s.image.dims3().expect("rank 3");
            BBox::full(h, w)
        }
    }
}

fn quantize_mask(t: &Tensor) -> Tensor {
    t.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0)
}

fn eval_items(samples: &[&SegSample], prompt: Option<Prompt>) -> Vec<EvalItem> {
    samples
        .iter()
        .map(|s| EvalItem {
            image: s.image.clone(),
            gt: s.gt.clone(),
            bbox: prompt.map(|p| prompt_box(p, s)),
        })
        .collect()
}

fn row_logger<'a>(tag: &'a str, log: Log<'a>) -> impl FnMut(&super::train::EpochRow) + 'a {
    move |r| {
        log(format!(
            "[{tag}] epoch {:>3} lr {:.3e} q {} loss {:.5} train_iou {} test_iou {:.4}",
            r.epoch,
            r.lr,
            r.q,
            r.loss,
            r.train_iou.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()),
            r.test.iou
        ))
    }
}

/// Trains the box-prompted auxiliary network on the fully labelled split.
pub fn train_anet(cfg: &ExperimentConfig, dm: &[&SegSample], test: &[&SegSample], log: Log) -> Result<(Network, RunRecord)> {
    if dm.is_empty() {
        return Err(Error::invalid("train_anet", "labelled split is empty"));
    }
    let mut net = Network::new(NetKind::Anet, cfg.encoder.clone(), derive_seed(cfg.seed, "anet-init"))?;
    let items: Vec<TrainItem> = dm
        .iter()
        .map(|s| TrainItem {
            id: s.id.clone(),
            image: s.image.clone(),
            target: s.gt.clone(),
            bbox: Some(prompt_box(cfg.prompt, s)),
            monitor: Some(s.gt.clone()),
        })
        .collect();
    let settings = TrainSettings {
        epochs: cfg.anet_epochs,
        batch_size: cfg.batch_size,
        lr: cfg.anet_lr,
        loss: cfg.anet_loss(),
        augment: cfg.augment,
        seed: derive_seed(cfg.seed, "anet-train"),
    };
    let test_items = eval_items(test, Some(cfg.prompt));
    let record = train_network(&mut net, &items, &test_items, &settings, row_logger("anet", log))?;
    Ok((net, record))
}

/// `sigmoid(p1)` of the auxiliary network, quantised to 8 bits, with rates against the clean mask.
pub fn generate_pseudo_labels(anet: &Network, dn: &[&SegSample], prompt: Prompt) -> Result<Vec<PseudoLabel>> {
    use rayon::prelude::*;
    if anet.kind() != NetKind::Anet {
        return Err(Error::invalid("generate_pseudo_labels", "expected an auxiliary network"));
    }
    dn.par_iter()
        .map(|s| {
            let bbox = prompt_box(prompt, s);
            let mask = quantize_mask(&anet.predict(&s.image, Some(&bbox))?.main_prob());
            mask.ensure_finite("pseudo label")?;
            let (fp_rate, fn_rate) = fp_fn_rates(&mask, &s.gt)?;
            Ok(PseudoLabel {
                sample_id: s.id.clone(),
                mask,
                source: LabelSource::Anet,
                fp_rate,
                fn_rate,
            })
        })
        .collect()
}

/// Quality of a set of pseudo labels against the clean masks (diagnostics only).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PseudoStats {
    pub count: usize,
    pub mean_fp_rate: f64,
    pub mean_fn_rate: f64,
    pub mean_f_beta: f64,
    pub mean_iou: f64,
    pub mean_mae: f64,
}

pub fn pseudo_stats(labels: &[PseudoLabel], dn: &[&SegSample]) -> Result<PseudoStats> {
    if labels.len() != dn.len() || labels.is_empty() {
        return Err(Error::invalid("pseudo_stats", "labels and samples must be non-empty and aligned"));
    }
    let n = labels.len() as f64;
    let mut st = PseudoStats {
        count: labels.len(),
        ..Default::default()
    };
    for (l, s) in labels.iter().zip(dn) {
        st.mean_fp_rate += l.fp_rate / n;
        st.mean_fn_rate += l.fn_rate / n;
        st.mean_f_beta += f_measure(&l.mask, &s.gt, BETA2, Threshold::Adaptive)? / n;
        st.mean_iou += iou_score(&l.mask, &s.gt, 0.5)? / n;
        st.mean_mae += mae_metric(&l.mask, &s.gt)? / n;
    }
    Ok(st)
}

/// Trains the image-only primary network on the assembled set.
pub fn train_pnet(cfg: &ExperimentConfig, dt: &[TrainItem], test: &[&SegSample], log: Log) -> Result<(Network, RunRecord)> {
    let mut net = Network::new(NetKind::Pnet, cfg.encoder.clone(), derive_seed(cfg.seed, "pnet-init"))?;
    let settings = TrainSettings {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        lr: cfg.lr,
        loss: cfg.loss,
        augment: cfg.augment,
        seed: derive_seed(cfg.seed, "pnet-train"),
    };
    let items: Vec<TrainItem> = dt.iter().map(|t| TrainItem { bbox: None, ..t.clone() }).collect();
    let record = train_network(&mut net, &items, &eval_items(test, None), &settings, row_logger("pnet", log))?;
    Ok((net, record))
}

/// Mean metrics of a network's main output on `test`. ANet receives each sample's box.
pub fn evaluate(net: &Network, test: &[&SegSample]) -> Result<MetricReport> {
    let prompt = (net.kind() == NetKind::Anet).then_some(Prompt::Box);
    evaluate_items(net, &eval_items(test, prompt))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub preset: Option<String>,
    pub seed: u64,
    pub frac_m: f64,
    pub switch_epoch: usize,
    pub epochs: usize,
    pub loss: String,
    pub n_dm: usize,
    pub n_dn: usize,
    pub n_test: usize,
    pub noise_override: Option<f64>,
    pub pseudo_source: LabelSource,
    pub pseudo: PseudoStats,
    pub anet_test: Option<MetricReport>,
    pub pnet_test: MetricReport,
    pub peak_test_iou: f64,
    pub peak_epoch: usize,
    pub final_test_iou: f64,
}

#[derive(Clone, Debug)]
pub struct RunBundle {
    pub anet_record: Option<RunRecord>,
    pub pnet_record: RunRecord,
    pub summary: Summary,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Assembles the PNet training set: clean masks for `D_m`, pseudo masks for `D_n`.
/// Clean masks of `D_n` travel only in `monitor`.
pub fn assemble_training_set(dm: &[&SegSample], dn: &[&SegSample], labels: &[PseudoLabel]) -> Result<Vec<TrainItem>> {
    let mut out: Vec<TrainItem> = dm
        .iter()
        .map(|s| TrainItem {
            id: s.id.clone(),
            image: s.image.clone(),
            target: s.gt.clone(),
            bbox: None,
            monitor: None,
        })
        .collect();
    for (s, l) in dn.iter().zip(labels) {
        if s.id != l.sample_id {
            return Err(Error::invalid("assemble", format!("label `{}` for sample `{}`", l.sample_id, s.id)));
        }
        out.push(TrainItem {
            id: s.id.clone(),
            image: s.image.clone(),
            target: l.mask.clone(),
            bbox: None,
            monitor: Some(s.gt.clone()),
        });
    }
    Ok(out)
}

fn by_split<'a>(m: &DatasetManifest, samples: &'a [SegSample], split: Split) -> Vec<&'a SegSample> {
    m.samples
        .iter()
        .zip(samples)
        .filter(|(e, _)| e.split == split)
        .map(|(_, s)| s)
        .collect()
}

/// Full protocol: split, auxiliary training, pseudo labels, primary training, evaluation.
pub fn run_wsscod(cfg: &ExperimentConfig, run_dir: &Path, log: Log) -> Result<RunBundle> {
    cfg.validate()?;
    let (manifest, samples) = load_dataset(&cfg.data_dir)?;
    let split = split_dataset(&manifest, cfg.frac_m, cfg.seed)?;
    let dm = by_split(&split, &samples, Split::DM);
    let dn = by_split(&split, &samples, Split::DN);
    let test = by_split(&split, &samples, Split::Test);
    if test.is_empty() {
        return Err(Error::invalid("run", "dataset has no test samples"));
    }
    fs::create_dir_all(run_dir).map_err(|e| Error::io(run_dir, e))?;
    write(&run_dir.join("config.json"), &(serde_json::to_string_pretty(cfg)? + "\n"))?;
    write_manifest(&split, run_dir)?;
    log(format!(
        "split: {} labelled, {} box-only, {} test",
        dm.len(),
        dn.len(),
        test.len()
    ));

    let (labels, anet_record, anet_test) = match cfg.noise_override {
        Some(rho) => {
            let labels = dn
                .iter()
                .map(|s| inject_noise_for(&s.gt, rho, derive_seed(cfg.seed, &format!("noise/{}", s.id)), s.id.clone()))
                .collect::<Result<Vec<_>>>()?;
            (labels, None, None)
        }
        None => {
            let (anet, mut rec) = train_anet(cfg, &dm, &test, log)?;
            save_checkpoint(&anet, &run_dir.join("anet.ckpt"))?;
            rec.checkpoint = Some("anet.ckpt".into());
            write(&run_dir.join("anet_epochs.csv"), &rec.to_csv())?;
            let anet_test = rec.final_row().map(|r| r.test);
            (generate_pseudo_labels(&anet, &dn, cfg.prompt)?, Some(rec), anet_test)
        }
    };
    save_pseudo_labels(run_dir, &labels)?;
    let pseudo = pseudo_stats(&labels, &dn)?;
    log(format!(
        "pseudo labels: mean F {:.4}, IoU {:.4}, fp {:.4}, fn {:.4}",
        pseudo.mean_f_beta, pseudo.mean_iou, pseudo.mean_fp_rate, pseudo.mean_fn_rate
    ));

    let dt = assemble_training_set(&dm, &dn, &labels)?;
    let (pnet, mut rec) = train_pnet(cfg, &dt, &test, log)?;
    save_checkpoint(&pnet, &run_dir.join("pnet.ckpt"))?;
    rec.checkpoint = Some("pnet.ckpt".into());
    write(&run_dir.join("epochs.csv"), &rec.to_csv())?;
    let pnet_test = evaluate(&pnet, &test)?;
    let (peak_epoch, peak_test_iou) = rec.peak_test_iou().expect("at least one epoch");
    let summary = Summary {
        preset: cfg.preset.map(|p| p.to_string()),
        seed: cfg.seed,
        frac_m: cfg.frac_m,
        switch_epoch: cfg.switch_epoch(),
        epochs: cfg.epochs,
        loss: cfg.loss.kind.name().to_string(),
        n_dm: dm.len(),
        n_dn: dn.len(),
        n_test: test.len(),
        noise_override: cfg.noise_override,
        pseudo_source: labels.first().map(|l| l.source).unwrap_or(LabelSource::Injected),
        pseudo,
        anet_test,
        pnet_test,
        peak_test_iou,
        peak_epoch,
        final_test_iou: pnet_test.iou,
    };
    write(&run_dir.join("summary.json"), &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    emit_curves(run_dir)?;
    Ok(RunBundle {
        anet_record,
        pnet_record: rec,
        summary,
    })
}
