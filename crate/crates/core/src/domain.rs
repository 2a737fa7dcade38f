//! Domain and dataset model, JSON ingestion, and missing-gap masking.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Axis-aligned hyper-rectangle `[lower, upper]` holding every input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Deserialize)]
struct RawBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RawBox> for Domain {
    type Error = Error;

    fn try_from(raw: RawBox) -> Result<Self> {
        Domain::new(raw.lower, raw.upper)
    }
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::Domain("domain needs at least one dimension".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::Dimension {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (d, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::Domain(format!(
                    "dimension {d}: upper ({hi}) must exceed lower ({lo})"
                )));
            }
        }
        Ok(Domain { lower, upper })
    }

    /// One-dimensional interval `[lower, upper]`.
    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        Domain::new(vec![lower], vec![upper])
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn extent(&self, d: usize) -> f64 {
        self.upper[d] - self.lower[d]
    }

    /// Lebesgue measure |X|.
    pub fn volume(&self) -> f64 {
        (0..self.dims()).map(|d| self.extent(d)).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dims()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Endpoint-inclusive lattice with `counts[d]` points per dimension, first
    /// dimension varying slowest.
    pub fn lattice(&self, counts: &[usize]) -> Result<Vec<Vec<f64>>> {
        if counts.len() != self.dims() {
            return Err(Error::Dimension {
                expected: self.dims(),
                got: counts.len(),
            });
        }
        let axes: Vec<Vec<f64>> = counts
            .iter()
            .enumerate()
            .map(|(d, &n)| {
                if n == 1 {
                    vec![0.5 * (self.lower[d] + self.upper[d])]
                } else {
                    let step = self.extent(d) / (n - 1) as f64;
                    (0..n)
                        .map(|k| {
                            if k == n - 1 {
                                self.upper[d]
                            } else {
                                self.lower[d] + step * k as f64
                            }
                        })
                        .collect()
                }
            })
            .collect();
        Ok(cartesian(&axes))
    }
}

/// Cartesian product of per-dimension coordinates, first axis slowest.
pub(crate) fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for &v in axis {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Regression,
    Classification,
    PointProcess,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Regression => "regression",
            TaskKind::Classification => "classification",
            TaskKind::PointProcess => "point_process",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegressionTask {
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassificationTask {
    pub inputs: Vec<Vec<f64>>,
    /// Values in {-1, +1}.
    pub labels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointProcessTask {
    pub events: Vec<Vec<f64>>,
}

/// Borrowed view of one task by global index.
#[derive(Debug, Clone, Copy)]
pub enum TaskRef<'a> {
    Regression(&'a RegressionTask),
    Classification(&'a ClassificationTask),
    PointProcess(&'a PointProcessTask),
}

impl TaskRef<'_> {
    pub fn kind(&self) -> TaskKind {
        match self {
            TaskRef::Regression(_) => TaskKind::Regression,
            TaskRef::Classification(_) => TaskKind::Classification,
            TaskRef::PointProcess(_) => TaskKind::PointProcess,
        }
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        match self {
            TaskRef::Regression(t) => &t.inputs,
            TaskRef::Classification(t) => &t.inputs,
            TaskRef::PointProcess(t) => &t.events,
        }
    }

    pub fn len(&self) -> usize {
        self.inputs().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Regression, classification and point-process tasks over a shared domain.
///
/// Global task order is all regression tasks, then all classification tasks,
/// then all point-process tasks; this fixes the block layout of every
/// downstream vector and matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneousDataset {
    pub domain: Domain,
    pub regression: Vec<RegressionTask>,
    pub classification: Vec<ClassificationTask>,
    pub point_process: Vec<PointProcessTask>,
}

impl HeterogeneousDataset {
    /// Builds and validates a dataset.
    pub fn new(
        domain: Domain,
        regression: Vec<RegressionTask>,
        classification: Vec<ClassificationTask>,
        point_process: Vec<PointProcessTask>,
    ) -> Result<Self> {
        let ds = HeterogeneousDataset {
            domain,
            regression,
            classification,
            point_process,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn num_tasks(&self) -> usize {
        self.regression.len() + self.classification.len() + self.point_process.len()
    }

    pub fn kinds(&self) -> Vec<TaskKind> {
        (0..self.num_tasks()).map(|i| self.task(i).kind()).collect()
    }

    /// Task at global index `i` (0-based). Panics when out of range; use
    /// [`HeterogeneousDataset::get`] for a checked lookup.
    pub fn task(&self, i: usize) -> TaskRef<'_> {
        self.get(i).expect("task index out of range")
    }

    pub fn get(&self, i: usize) -> Result<TaskRef<'_>> {
        let (nr, nc) = (self.regression.len(), self.classification.len());
        if i < nr {
            Ok(TaskRef::Regression(&self.regression[i]))
        } else if i < nr + nc {
            Ok(TaskRef::Classification(&self.classification[i - nr]))
        } else if i < self.num_tasks() {
            Ok(TaskRef::PointProcess(&self.point_process[i - nr - nc]))
        } else {
            Err(Error::TaskIndex {
                index: i,
                count: self.num_tasks(),
            })
        }
    }

    /// Global index of the first point-process task.
    pub fn point_process_offset(&self) -> usize {
        self.regression.len() + self.classification.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_tasks() == 0 {
            return Err(Error::Schema {
                task: 0,
                record: 0,
                message: "dataset contains no tasks".into(),
            });
        }
        let dims = self.domain.dims();
        for i in 0..self.num_tasks() {
            let task = self.task(i);
            match task {
                TaskRef::Regression(t) if t.inputs.len() != t.outputs.len() => {
                    return Err(Error::Schema {
                        task: i,
                        record: t.inputs.len().min(t.outputs.len()),
                        message: format!(
                            "{} inputs but {} outputs",
                            t.inputs.len(),
                            t.outputs.len()
                        ),
                    });
                }
                TaskRef::Regression(t) => {
                    if let Some(n) = t.outputs.iter().position(|y| !y.is_finite()) {
                        return Err(Error::Schema {
                            task: i,
                            record: n,
                            message: "output is not finite".into(),
                        });
                    }
                }
                TaskRef::Classification(t) => {
                    if t.inputs.len() != t.labels.len() {
                        return Err(Error::Schema {
                            task: i,
                            record: t.inputs.len().min(t.labels.len()),
                            message: format!(
                                "{} inputs but {} labels",
                                t.inputs.len(),
                                t.labels.len()
                            ),
                        });
                    }
                    if let Some(n) = t.labels.iter().position(|&y| y != 1.0 && y != -1.0) {
                        return Err(Error::Schema {
                            task: i,
                            record: n,
                            message: format!("label {} is not -1 or +1", t.labels[n]),
                        });
                    }
                }
                TaskRef::PointProcess(_) => {}
            }
            for (n, x) in task.inputs().iter().enumerate() {
                if x.len() != dims {
                    return Err(Error::Schema {
                        task: i,
                        record: n,
                        message: format!("expected {dims} coordinates, got {}", x.len()),
                    });
                }
                if !self.domain.contains(x) {
                    return Err(Error::OutsideDomain { task: i, record: n });
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DatasetFile = serde_json::from_str(text)?;
        file.into_dataset()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&DatasetFile::from_dataset(self))
            .expect("dataset serialization cannot fail")
    }

    /// Replaces every task's records, keeping domain and task layout.
    fn map_records(&self, mut keep: impl FnMut(usize, &[f64]) -> bool) -> Self {
        let mut out = self.clone();
        let nr = self.regression.len();
        let nc = self.classification.len();
        for (i, t) in out.regression.iter_mut().enumerate() {
            let (inputs, outputs) = t
                .inputs
                .iter()
                .zip(&t.outputs)
                .filter(|(x, _)| keep(i, x))
                .map(|(x, y)| (x.clone(), *y))
                .unzip();
            *t = RegressionTask { inputs, outputs };
        }
        for (k, t) in out.classification.iter_mut().enumerate() {
            let (inputs, labels) = t
                .inputs
                .iter()
                .zip(&t.labels)
                .filter(|(x, _)| keep(nr + k, x))
                .map(|(x, y)| (x.clone(), *y))
                .unzip();
            *t = ClassificationTask { inputs, labels };
        }
        for (k, t) in out.point_process.iter_mut().enumerate() {
            t.events.retain(|x| keep(nr + nc + k, x));
        }
        out
    }

    /// Dataset with the same domain and task layout but no records.
    pub fn emptied(&self) -> Self {
        self.map_records(|_, _| false)
    }
}

/// Loads and validates a dataset JSON file.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<HeterogeneousDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    HeterogeneousDataset::from_json(&text)
}

pub fn save_dataset(dataset: &HeterogeneousDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, dataset.to_json()).map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    domain: DomainFile,
    tasks: Vec<TaskFile>,
}

#[derive(Serialize, Deserialize)]
struct DomainFile {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum TaskFile {
    Regression {
        inputs: Vec<Vec<f64>>,
        outputs: Vec<f64>,
    },
    Classification {
        inputs: Vec<Vec<f64>>,
        labels: Vec<f64>,
    },
    PointProcess {
        events: Vec<Vec<f64>>,
    },
}

impl DatasetFile {
    fn into_dataset(self) -> Result<HeterogeneousDataset> {
        let domain = Domain::new(self.domain.lower, self.domain.upper)?;
        let mut regression = Vec::new();
        let mut classification = Vec::new();
        let mut point_process = Vec::new();
        let mut stage = 0u8;
        for (i, task) in self.tasks.into_iter().enumerate() {
            let this_stage = match &task {
                TaskFile::Regression { .. } => 0,
                TaskFile::Classification { .. } => 1,
                TaskFile::PointProcess { .. } => 2,
            };
            if this_stage < stage {
                return Err(Error::Schema {
                    task: i,
                    record: 0,
                    message: "tasks must be ordered regression, classification, point_process"
                        .into(),
                });
            }
            stage = this_stage;
            match task {
                TaskFile::Regression { inputs, outputs } => {
                    regression.push(RegressionTask { inputs, outputs })
                }
                TaskFile::Classification { inputs, labels } => {
                    classification.push(ClassificationTask { inputs, labels })
                }
                TaskFile::PointProcess { events } => {
                    point_process.push(PointProcessTask { events })
                }
            }
        }
        HeterogeneousDataset::new(domain, regression, classification, point_process)
    }

    fn from_dataset(ds: &HeterogeneousDataset) -> Self {
        let tasks = (0..ds.num_tasks())
            .map(|i| match ds.task(i) {
                TaskRef::Regression(t) => TaskFile::Regression {
                    inputs: t.inputs.clone(),
                    outputs: t.outputs.clone(),
                },
                TaskRef::Classification(t) => TaskFile::Classification {
                    inputs: t.inputs.clone(),
                    labels: t.labels.clone(),
                },
                TaskRef::PointProcess(t) => TaskFile::PointProcess {
                    events: t.events.clone(),
                },
            })
            .collect();
        DatasetFile {
            domain: DomainFile {
                lower: ds.domain.lower.clone(),
                upper: ds.domain.upper.clone(),
            },
            tasks,
        }
    }
}

/// Closed axis-aligned box removed from one task's training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl MaskBox {
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| hi - lo)
            .product()
    }

    pub fn as_domain(&self) -> Result<Domain> {
        Domain::new(self.lower.clone(), self.upper.clone())
    }

    fn within(&self, domain: &Domain) -> bool {
        self.lower.len() == domain.dims()
            && self.upper.len() == domain.dims()
            && self
                .lower
                .iter()
                .zip(&self.upper)
                .enumerate()
                .all(|(d, (lo, hi))| lo <= hi && *lo >= domain.lower[d] && *hi <= domain.upper[d])
    }

    /// Whether the interiors of two boxes intersect.
    pub fn overlaps(&self, other: &MaskBox) -> bool {
        self.lower
            .iter()
            .zip(&self.upper)
            .zip(other.lower.iter().zip(&other.upper))
            .all(|((a_lo, a_hi), (b_lo, b_hi))| a_lo < b_hi && b_lo < a_hi)
    }
}

/// Per-task mask: a box, or nothing masked.
pub type MaskSpec = Option<MaskBox>;

/// Splits each task into records outside its mask (train) and inside (test).
pub fn apply_mask(
    dataset: &HeterogeneousDataset,
    masks: &[MaskSpec],
) -> Result<(HeterogeneousDataset, HeterogeneousDataset)> {
    if masks.len() != dataset.num_tasks() {
        return Err(Error::InvalidArgument(format!(
            "expected {} masks (one per task), got {}",
            dataset.num_tasks(),
            masks.len()
        )));
    }
    for (i, m) in masks.iter().enumerate() {
        if let Some(b) = m {
            if !b.within(&dataset.domain) {
                return Err(Error::MaskOutsideDomain(i));
            }
        }
    }
    let inside = |i: usize, x: &[f64]| masks[i].as_ref().is_some_and(|b| b.contains(x));
    let train = dataset.map_records(|i, x| !inside(i, x));
    let test = dataset.map_records(inside);
    Ok((train, test))
}

/// Picks `count` distinct cells of an even partition of the domain into boxes
/// of side `width[d]`, and assigns them to the first `count` tasks.
pub fn random_masks(
    dataset: &HeterogeneousDataset,
    width: &[f64],
    count: usize,
    seed: u64,
) -> Result<Vec<MaskSpec>> {
    let domain = &dataset.domain;
    let tasks = dataset.num_tasks();
    if width.len() != domain.dims() {
        return Err(Error::Dimension {
            expected: domain.dims(),
            got: width.len(),
        });
    }
    if count == 0 {
        return Ok(vec![None; tasks]);
    }
    let mut axes = Vec::with_capacity(width.len());
    for (d, &w) in width.iter().enumerate() {
        if w.is_nan() || w <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "mask width must be positive, got {w}"
            )));
        }
        // tolerate widths that divide the extent up to rounding
        let n = (domain.extent(d) / w + 1e-9).floor() as usize;
        axes.push((0..n).map(|k| k as f64).collect::<Vec<f64>>());
    }
    let cells = cartesian(&axes);
    if count > cells.len() || count > tasks {
        return Err(Error::InfeasibleMasks {
            count,
            available: cells.len(),
            tasks,
        });
    }
    let mut order: Vec<usize> = (0..cells.len()).collect();
    let mut rng = rng::stream(seed, Stream::Masks);
    order.shuffle(&mut rng);
    let mut masks = vec![None; tasks];
    for (task, &cell) in order.iter().take(count).enumerate() {
        let idx = &cells[cell];
        let lower: Vec<f64> = (0..domain.dims())
            .map(|d| domain.lower[d] + idx[d] * width[d])
            .collect();
        let upper: Vec<f64> = lower.iter().zip(width).map(|(lo, w)| lo + w).collect();
        masks[task] = Some(MaskBox { lower, upper });
    }
    Ok(masks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp_dataset(events: &[f64]) -> HeterogeneousDataset {
        HeterogeneousDataset::new(
            Domain::interval(0.0, 100.0).unwrap(),
            vec![],
            vec![],
            vec![PointProcessTask {
                events: events.iter().map(|&e| vec![e]).collect(),
            }],
        )
        .unwrap()
    }

    #[test]
    fn domain_invariants() {
        assert!(Domain::interval(1.0, 1.0).is_err());
        assert!(Domain::new(vec![0.0, 0.0], vec![1.0]).is_err());
        let d = Domain::new(vec![0.0, 0.0], vec![100.0, 50.0]).unwrap();
        assert_eq!(d.volume(), 5000.0);
        assert!(d.contains(&[100.0, 0.0]));
        assert!(!d.contains(&[100.1, 0.0]));
    }

    #[test]
    fn minimal_file_loads() {
        let text = r#"{"domain":{"lower":[0],"upper":[100]},
            "tasks":[{"type":"regression","inputs":[[1.0],[2.0]],"outputs":[0.5,-0.5]}]}"#;
        let ds = HeterogeneousDataset::from_json(text).unwrap();
        assert_eq!(ds.num_tasks(), 1);
        assert_eq!(ds.regression.len(), 1);
        assert_eq!(ds.kinds(), vec![TaskKind::Regression]);
    }

    #[test]
    fn bad_label_is_schema_error() {
        let text = r#"{"domain":{"lower":[0],"upper":[100]},
            "tasks":[{"type":"classification","inputs":[[1.0],[2.0]],"labels":[1,0]}]}"#;
        match HeterogeneousDataset::from_json(text) {
            Err(Error::Schema {
                task: 0, record: 1, ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn outside_point_reports_indices() {
        let text = r#"{"domain":{"lower":[0],"upper":[10]},
            "tasks":[{"type":"regression","inputs":[[1.0]],"outputs":[1.0]},
                     {"type":"point_process","events":[[3.0],[11.0]]}]}"#;
        match HeterogeneousDataset::from_json(text) {
            Err(Error::OutsideDomain { task: 1, record: 1 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn garbage_is_parse_error() {
        assert!(matches!(
            HeterogeneousDataset::from_json("{not json"),
            Err(Error::Parse(_))
        ));
        let unknown = r#"{"domain":{"lower":[0],"upper":[1]},"tasks":[{"type":"ranking"}]}"#;
        assert!(matches!(
            HeterogeneousDataset::from_json(unknown),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn empty_dataset_rejected_but_empty_task_allowed() {
        let none = r#"{"domain":{"lower":[0],"upper":[1]},"tasks":[]}"#;
        assert!(HeterogeneousDataset::from_json(none).is_err());
        let empty_pp = r#"{"domain":{"lower":[0],"upper":[1]},"tasks":[{"type":"point_process","events":[]}]}"#;
        assert!(HeterogeneousDataset::from_json(empty_pp).is_ok());
    }

    #[test]
    fn out_of_order_tasks_rejected() {
        let text = r#"{"domain":{"lower":[0],"upper":[10]},
            "tasks":[{"type":"point_process","events":[]},
                     {"type":"regression","inputs":[[1.0]],"outputs":[1.0]}]}"#;
        assert!(matches!(
            HeterogeneousDataset::from_json(text),
            Err(Error::Schema { task: 1, .. })
        ));
    }

    #[test]
    fn mask_interval_membership() {
        let ds = pp_dataset(&[3.0, 7.0, 12.0]);
        let mask = Some(MaskBox {
            lower: vec![5.0],
            upper: vec![10.0],
        });
        let (train, test) = apply_mask(&ds, &[mask]).unwrap();
        assert_eq!(train.point_process[0].events, vec![vec![3.0], vec![12.0]]);
        assert_eq!(test.point_process[0].events, vec![vec![7.0]]);
        assert_eq!(train.domain, ds.domain);
    }

    #[test]
    fn empty_mask_keeps_everything() {
        let ds = pp_dataset(&[3.0, 7.0, 12.0]);
        let (train, test) = apply_mask(&ds, &[None]).unwrap();
        assert_eq!(train, ds);
        assert!(test.point_process[0].events.is_empty());
        let outside = Some(MaskBox {
            lower: vec![90.0],
            upper: vec![120.0],
        });
        assert!(matches!(
            apply_mask(&ds, &[outside]),
            Err(Error::MaskOutsideDomain(0))
        ));
    }

    #[test]
    fn random_masks_partition_arithmetic() {
        let ds = HeterogeneousDataset::new(
            Domain::interval(0.0, 100.0).unwrap(),
            vec![RegressionTask::default()],
            vec![ClassificationTask::default()],
            vec![PointProcessTask::default(), PointProcessTask::default()],
        )
        .unwrap();
        for width in [5.0, 10.0] {
            let masks = random_masks(&ds, &[width], 4, 11).unwrap();
            assert_eq!(masks, random_masks(&ds, &[width], 4, 11).unwrap());
            let boxes: Vec<&MaskBox> = masks.iter().map(|m| m.as_ref().unwrap()).collect();
            for (a, b) in boxes
                .iter()
                .enumerate()
                .flat_map(|(k, a)| boxes[k + 1..].iter().map(move |b| (a, b)))
            {
                assert!(!a.overlaps(b));
            }
            for b in &boxes {
                assert!((b.upper[0] - b.lower[0] - width).abs() < 1e-12);
                let cell = b.lower[0] / width;
                assert!((cell - cell.round()).abs() < 1e-12);
                assert!(b.upper[0] <= 100.0);
            }
        }
        assert!(matches!(
            random_masks(&ds, &[30.0], 4, 1),
            Err(Error::InfeasibleMasks { available: 3, .. })
        ));
        assert!(random_masks(&ds, &[5.0], 5, 1).is_err());
    }

    proptest::proptest! {
        #[test]
        fn mask_partitions_records(
            events in proptest::collection::vec(0.0f64..100.0, 0..60),
            lo in 0.0f64..90.0,
            w in 0.0f64..10.0,
        ) {
            let ds = pp_dataset(&events);
            let mask = MaskBox { lower: vec![lo], upper: vec![lo + w] };
            let (train, test) = apply_mask(&ds, &[Some(mask.clone())]).unwrap();
            let (tr, te) = (&train.point_process[0].events, &test.point_process[0].events);
            proptest::prop_assert_eq!(tr.len() + te.len(), events.len());
            proptest::prop_assert!(te.iter().all(|x| mask.contains(x)));
            proptest::prop_assert!(tr.iter().all(|x| !mask.contains(x)));
        }

        #[test]
        fn json_round_trip(
            ys in proptest::collection::vec(-5.0f64..5.0, 1..10),
            labels in proptest::collection::vec(proptest::bool::ANY, 0..10),
        ) {
            let reg = RegressionTask {
                inputs: (0..ys.len()).map(|k| vec![k as f64 * 1.37]).collect(),
                outputs: ys.clone(),
            };
            let cls = ClassificationTask {
                inputs: (0..labels.len()).map(|k| vec![k as f64 * 0.31]).collect(),
                labels: labels.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect(),
            };
            let ds = HeterogeneousDataset::new(
                Domain::interval(0.0, 100.0).unwrap(), vec![reg], vec![cls],
                vec![PointProcessTask { events: vec![vec![1.0], vec![1.0]] }],
            ).unwrap();
            let back = HeterogeneousDataset::from_json(&ds.to_json()).unwrap();
            proptest::prop_assert_eq!(back, ds);
        }
    }
}
