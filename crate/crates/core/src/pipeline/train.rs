use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::augment::augment;
use super::config::Augment;
use crate::data::BBox;
use crate::error::{Error, Result};
use crate::losses::{composite_loss, q_at, LossSpec};
use crate::metrics::{iou_score, MetricReport};
use crate::model::{Grads, Network};
use crate::numerics::{lr_at, Adam, LrSchedule};
use crate::tensor::Tensor;

/// One training example. `target` is what the loss sees; `monitor` is an optional clean
/// mask used only to report training IoU.
#[derive(Clone, Debug)]
pub struct TrainItem {
    pub id: String,
    pub image: Tensor,
    pub target: Tensor,
    pub bbox: Option<BBox>,
    pub monitor: Option<Tensor>,
}

#[derive(Clone, Debug)]
pub struct EvalItem {
    pub image: Tensor,
    pub gt: Tensor,
    pub bbox: Option<BBox>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub lr: f64,
    pub q: f64,
    pub loss: f64,
    /// Mean IoU of the main output against the monitor masks, when any are present.
    pub train_iou: Option<f64>,
    pub test: MetricReport,
}

pub const EPOCH_CSV_HEADER: &str = "epoch,lr,q,loss,train_iou,test_mae,test_e,test_f,test_s,test_iou";

impl EpochRow {
    pub fn csv(&self) -> String {
        let iou = self.train_iou.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.epoch,
            self.lr,
            self.q,
            self.loss,
            iou,
            self.test.mae,
            self.test.e_phi,
            self.test.f_beta,
            self.test.s_alpha,
            self.test.iou
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub rows: Vec<EpochRow>,
    pub checkpoint: Option<String>,
}

impl RunRecord {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(EPOCH_CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv());
            s.push('\n');
        }
        s
    }

    pub fn final_row(&self) -> Option<&EpochRow> {
        self.rows.last()
    }

    /// `(epoch, value)` of the best test IoU.
    pub fn peak_test_iou(&self) -> Option<(usize, f64)> {
        self.rows
            .iter()
            .map(|r| (r.epoch, r.test.iou))
            .fold(None, |best, cur| match best {
                Some((_, b)) if b >= cur.1 => best,
                _ => Some(cur),
            })
    }
}

#[derive(Clone, Debug)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: LrSchedule,
    pub loss: LossSpec,
    pub augment: Augment,
    pub seed: u64,
}

/// Mean metrics of the main output over `items`.
pub fn evaluate_items(net: &Network, items: &[EvalItem]) -> Result<MetricReport> {
    if items.is_empty() {
        return Err(Error::invalid("evaluate", "test split is empty"));
    }
    let reports = items
        .par_iter()
        .map(|it| {
            let p = net.predict(&it.image, it.bbox.as_ref())?.main_prob();
            MetricReport::single(&p, &it.gt)
        })
        .collect::<Result<Vec<_>>>()?;
    MetricReport::mean(&reports)
}

struct SampleOut {
    loss: f64,
    grads: Grads,
    monitor_iou: Option<f64>,
}

fn sample_step(net: &Network, view_image: &Tensor, target: &Tensor, bbox: Option<&BBox>, monitor: Option<&Tensor>, loss: &LossSpec, epoch: usize) -> Result<SampleOut> {
    let (pred, tape) = net.forward(view_image, bbox)?;
    let r = composite_loss(&pred.as_list(), target, loss, epoch)?;
    let mut grads = net.params().zero_grads();
    let d: [Tensor; 5] = r.grads.try_into().expect("five outputs");
    net.backward(&tape, &d, &mut grads)?;
    let monitor_iou = match monitor {
        Some(m) => Some(iou_score(&pred.main_prob(), m, 0.5)?),
        None => None,
    };
    Ok(SampleOut {
        loss: r.value,
        grads,
        monitor_iou,
    })
}

/// Mini-batch Adam training. Calls `on_epoch` after each epoch with the finished row.
pub fn train_network(
    net: &mut Network,
    items: &[TrainItem],
    test: &[EvalItem],
    s: &TrainSettings,
    mut on_epoch: impl FnMut(&EpochRow),
) -> Result<RunRecord> {
    if items.is_empty() {
        return Err(Error::invalid("train", "training split is empty"));
    }
    if s.lr.total_epochs < s.epochs {
        return Err(Error::invalid("train", "learning-rate schedule is shorter than training"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let adam = Adam::default();
    let mut step: u64 = 0;
    let mut rows = Vec::with_capacity(s.epochs);
    let mut order: Vec<usize> = (0..items.len()).collect();
    for epoch in 0..s.epochs {
        let lr = lr_at(&s.lr, epoch)?;
        let q = q_at(&s.loss, epoch);
        order.shuffle(&mut rng);
        let (mut loss_sum, mut iou_sum, mut iou_n) = (0.0, 0.0, 0usize);
        for batch in order.chunks(s.batch_size) {
            // views are drawn sequentially so the stream is independent of thread count
            let views: Vec<_> = batch
                .iter()
                .map(|&i| {
                    let it = &items[i];
                    let mut masks = vec![&it.target];
                    masks.extend(it.monitor.as_ref());
                    augment(&mut rng, s.augment, &it.image, &masks, it.bbox.as_ref())
                })
                .collect();
            let outs = views
                .par_iter()
                .map(|v| sample_step(net, &v.image, &v.masks[0], v.bbox.as_ref(), v.masks.get(1), &s.loss, epoch))
                .collect::<Result<Vec<_>>>()?;
            let mut grads = net.params().zero_grads();
            for o in &outs {
                grads.add(&o.grads)?;
                loss_sum += o.loss;
                if let Some(v) = o.monitor_iou {
                    iou_sum += v;
                    iou_n += 1;
                }
            }
            let batch_loss: f64 = outs.iter().map(|o| o.loss).sum();
            if !batch_loss.is_finite() || !grads.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    loss: batch_loss,
                });
            }
            step += 1;
            net.params_mut().apply(&grads, 1.0 / batch.len() as f64, lr, adam, step)?;
        }
        let test_report = if test.is_empty() {
            MetricReport::default()
        } else {
            evaluate_items(net, test)?
        };
        let row = EpochRow {
            epoch,
            lr,
            q,
            loss: loss_sum / items.len() as f64,
            train_iou: (iou_n > 0).then(|| iou_sum / iou_n as f64),
            test: test_report,
        };
        on_epoch(&row);
        rows.push(row);
    }
    Ok(RunRecord {
        rows,
        checkpoint: None,
    })
}
