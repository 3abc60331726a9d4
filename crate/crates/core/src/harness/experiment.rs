use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::grid::{best_of, grid_search, CvPlan, CvScheme, GridChoice, GridPoint, GridSpec};
use super::methods::{fit_predict, MethodContext, TaskData};
use super::metrics::Metric;
use super::split::check_no_leakage;
use super::{EvalRecord, Executor, ExperimentPlan, Pairing, Sequential, Setting, Size, SizeAxis};
use crate::error::{Error, Result};
use crate::features::{
    balance_rest, extract_features_with_reference, segment_windows, subsample_regular, EmgRecording, FeatureMatrix,
    Standardizer, SubjectKind, REST,
};
use crate::lssvm::{train_ova, HyperParams, OvaModel};
use crate::rng::{self, hash_str};
use crate::transfer::SourceHypothesis;

/// One subject's windowed features over all repetitions, unstandardized.
#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub id: String,
    pub kind: SubjectKind,
    pub features: FeatureMatrix,
}

/// Windows and featurizes a recording per the plan. Batch feature statistics
/// use training repetitions only; rest is balanced or dropped.
pub fn prepare_subject(rec: &EmgRecording, plan: &ExperimentPlan) -> Result<Subject> {
    let windows = segment_windows(rec, &plan.window)?;
    let train_reps = &plan.split.train_reps;
    let fm = extract_features_with_reference(&windows, plan.features, |r| train_reps.contains(&r))?;
    let fm = if plan.include_rest {
        balance_rest(&fm, rng::mix(plan.seed, &[hash_str("rest"), hash_str(&rec.subject_id)]))
    } else {
        fm.filter(|label, _| label != REST)
    };
    Ok(Subject {
        id: rec.subject_id.clone(),
        kind: rec.subject_kind,
        features: fm,
    })
}

impl Subject {
    fn rows_in(&self, reps: &[u32], what: &'static str) -> Result<FeatureMatrix> {
        let fm = self.features.filter(|_, r| reps.contains(&r));
        if fm.is_empty() {
            return Err(Error::EmptySplit(what));
        }
        Ok(fm)
    }

    /// Subsampled training-repetition rows.
    fn train_pool(&self, plan: &ExperimentPlan) -> Result<FeatureMatrix> {
        subsample_regular(&self.rows_in(&plan.split.train_reps, "train")?, plan.train_subsample, 0)
    }

    fn test_set(&self, plan: &ExperimentPlan) -> Result<FeatureMatrix> {
        self.rows_in(&plan.split.test_reps, "test")
    }

    /// Data a source model is trained on: the training repetitions, or every
    /// repetition in the realistic setting.
    fn source_pool(&self, plan: &ExperimentPlan) -> Result<FeatureMatrix> {
        if plan.setting == Setting::Realistic {
            let mut all = plan.split.train_reps.clone();
            all.extend(&plan.split.test_reps);
            subsample_regular(&self.rows_in(&all, "source")?, plan.train_subsample, 0)
        } else {
            self.train_pool(plan)
        }
    }
}

fn standardized(fm: &FeatureMatrix) -> Result<FeatureMatrix> {
    Standardizer::fit(fm)?.apply(fm)
}

fn train_point(fm: &FeatureMatrix, point: &GridPoint) -> Result<OvaModel> {
    train_ova(&fm.features, &fm.labels, &HyperParams::rbf(point.c, point.gamma)?)
}

/// Cross-subject accuracies: a model per (source, grid point), each scored
/// on every other evaluation subject.
#[derive(Debug, Clone)]
pub struct CrossSubjectTable {
    pub points: Vec<GridPoint>,
    pub sources: Vec<String>,
    pub evaluators: Vec<String>,
    /// `[point][source][evaluator]`; `None` on the diagonal or on failure.
    pub accuracy: Vec<Vec<Vec<Option<f64>>>>,
    models: BTreeMap<(usize, usize), OvaModel>,
}

impl CrossSubjectTable {
    /// Sources and evaluators are `(id, standardized data)` pairs.
    pub fn build(
        sources: &[(String, FeatureMatrix)],
        evaluators: &[(String, FeatureMatrix)],
        grid: &GridSpec,
        exec: &impl Executor,
    ) -> Result<Self> {
        grid.validate()?;
        let points = grid.points();
        let jobs: Vec<(usize, usize)> = (0..points.len())
            .flat_map(|p| (0..sources.len()).map(move |s| (p, s)))
            .collect();
        let results = exec.map(jobs.clone(), |(p, s)| {
            let (sid, data) = &sources[s];
            let model = train_point(data, &points[p]).ok();
            let accs: Vec<Option<f64>> = evaluators
                .iter()
                .map(|(eid, eval)| {
                    if eid == sid {
                        return None;
                    }
                    let m = model.as_ref()?;
                    let predicted = m.predict_labels(&eval.features).ok()?;
                    Metric::Balanced.evaluate(&eval.labels, &predicted).ok()
                })
                .collect();
            (model, accs)
        });
        let mut accuracy = alloc::vec![alloc::vec![Vec::new(); sources.len()]; points.len()];
        let mut models = BTreeMap::new();
        for ((p, s), (model, accs)) in jobs.into_iter().zip(results) {
            accuracy[p][s] = accs;
            if let Some(m) = model {
                models.insert((p, s), m);
            }
        }
        Ok(CrossSubjectTable {
            points,
            sources: sources.iter().map(|(id, _)| id.clone()).collect(),
            evaluators: evaluators.iter().map(|(id, _)| id.clone()).collect(),
            accuracy,
            models,
        })
    }

    /// Point maximizing the mean accuracy over (source, evaluator) pairs of
    /// distinct subjects, none of them `exclude`.
    pub fn select(&self, exclude: &str) -> Result<GridChoice> {
        let pairs: Vec<(usize, usize)> = self
            .sources
            .iter()
            .enumerate()
            .filter(|(_, s)| *s != exclude)
            .flat_map(|(i, s)| {
                self.evaluators
                    .iter()
                    .enumerate()
                    .filter(move |(_, e)| *e != exclude && *e != s)
                    .map(move |(j, _)| (i, j))
            })
            .collect();
        if pairs.is_empty() {
            let mut ids: Vec<&String> = self.sources.iter().chain(&self.evaluators).filter(|s| *s != exclude).collect();
            ids.sort();
            ids.dedup();
            return Err(Error::InsufficientSubjects {
                needed: 2,
                found: ids.len(),
            });
        }
        let scored = self
            .points
            .iter()
            .enumerate()
            .map(|(p, point)| {
                let mut total = 0.0;
                for &(i, j) in &pairs {
                    match self.accuracy[p][i][j] {
                        Some(a) => total += a,
                        None => {
                            return (
                                *point,
                                Err(Error::InvalidParameter(format!(
                                    "source {} failed at C={} gamma={}",
                                    self.sources[i], point.c, point.gamma
                                ))),
                            )
                        }
                    }
                }
                (*point, Ok(total / pairs.len() as f64))
            })
            .collect();
        best_of(scored)
    }

    /// The model of `source` trained at `point`, if that point is in the table.
    pub fn model(&self, source: &str, point: &GridPoint) -> Option<&OvaModel> {
        let s = self.sources.iter().position(|id| id == source)?;
        let p = self.points.iter().position(|q| q == point)?;
        self.models.get(&(p, s))
    }
}

/// Cross-subject hyperparameters for `exclude`: every other subject serves as
/// both source and evaluator; `exclude`'s data is never touched.
pub fn select_source_hp_original(
    subjects: &[Subject],
    grid: &GridSpec,
    plan: &ExperimentPlan,
    exclude: &str,
) -> Result<GridChoice> {
    let others = subjects
        .iter()
        .filter(|s| s.id != exclude)
        .map(|s| Ok((s.id.clone(), standardized(&s.train_pool(plan)?)?)))
        .collect::<Result<Vec<_>>>()?;
    if others.len() < 2 {
        return Err(Error::InsufficientSubjects {
            needed: 2,
            found: others.len(),
        });
    }
    CrossSubjectTable::build(&others, &others, grid, &Sequential)?.select(exclude)
}

/// Target and source subject indices for each target.
fn role_assignment(subjects: &[Subject], pairing: Pairing) -> Result<Vec<(usize, Vec<usize>)>> {
    let of_kind = |k: SubjectKind| -> Vec<usize> { (0..subjects.len()).filter(|&i| subjects[i].kind == k).collect() };
    let (targets, pool) = match pairing {
        Pairing::IntactIntact => (of_kind(SubjectKind::Intact), of_kind(SubjectKind::Intact)),
        Pairing::AmputeeAmputee => (of_kind(SubjectKind::Amputee), of_kind(SubjectKind::Amputee)),
        Pairing::AmputeeIntact => (of_kind(SubjectKind::Amputee), of_kind(SubjectKind::Intact)),
    };
    let kinds = match pairing {
        Pairing::IntactIntact => "at least 2 intact subjects",
        Pairing::AmputeeAmputee => "at least 2 amputee subjects",
        Pairing::AmputeeIntact => "at least 1 amputee and 1 intact subject",
    };
    let roles: Vec<(usize, Vec<usize>)> = targets
        .iter()
        .map(|&t| (t, pool.iter().copied().filter(|&s| s != t).collect()))
        .collect();
    if roles.is_empty() || roles.iter().any(|(_, s)| s.is_empty()) {
        return Err(Error::Pairing(format!(
            "pairing {} needs {kinds}; dataset has {} intact and {} amputee",
            pairing.as_str(),
            of_kind(SubjectKind::Intact).len(),
            of_kind(SubjectKind::Amputee).len()
        )));
    }
    Ok(roles)
}

/// Per-source realistic tuning: repetition-fold CV over all of the
/// source's repetitions, then a final fit on all of them.
fn tuned_source(data: &FeatureMatrix, plan: &ExperimentPlan, id: &str) -> Result<(GridPoint, OvaModel)> {
    let cv = CvPlan {
        scheme: CvScheme::ByRepetition { fallback: plan.cv_folds },
        metric: plan.setting.metric(),
        subsample: plan.tuning_subsample,
    };
    let seed = rng::mix(plan.seed, &[hash_str(plan.setting.as_str()), hash_str("source"), hash_str(id)]);
    let fit = |p: &GridPoint, tr: &[usize], va: &[usize]| {
        train_point(&data.select(tr), p)?.predict_labels(&data.select(va).features)
    };
    let choice = grid_search(data, &plan.grid, &cv, &fit, seed)?;
    Ok((choice.point, train_point(data, &choice.point)?))
}

struct TaskSpec {
    target: usize,
    sources: Vec<usize>,
    size: Size,
    /// Fixed point for the original setting.
    fixed: Option<GridPoint>,
}

pub fn run_experiment(plan: &ExperimentPlan, recordings: &[EmgRecording]) -> Result<Vec<EvalRecord>> {
    run_experiment_with(plan, recordings, &Sequential)
}

/// Runs every (target, size) task through `exec`; records come out ordered
/// by target, size, then method regardless of scheduling.
pub fn run_experiment_with(
    plan: &ExperimentPlan,
    recordings: &[EmgRecording],
    exec: &impl Executor,
) -> Result<Vec<EvalRecord>> {
    plan.validate()?;
    let mut ids: Vec<&str> = recordings.iter().map(|r| r.subject_id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidRecording(format!("duplicate subject id {}", w[0])));
    }
    let subjects = exec
        .map(recordings.iter().collect(), |r| prepare_subject(r, plan))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let roles = role_assignment(&subjects, plan.pairing)?;

    let mut involved: Vec<usize> = roles.iter().flat_map(|(t, s)| core::iter::once(*t).chain(s.iter().copied())).collect();
    involved.sort_unstable();
    involved.dedup();

    // Source models keyed by (subject, point), and the point each target uses.
    let mut source_models: BTreeMap<(usize, u64, u64), OvaModel> = BTreeMap::new();
    let mut target_points: Vec<Option<GridPoint>> = alloc::vec![None; roles.len()];
    let key = |s: usize, p: &GridPoint| (s, p.c.to_bits(), p.gamma.to_bits());

    if plan.setting == Setting::Realistic {
        let mut needed: Vec<usize> = roles.iter().flat_map(|(_, s)| s.iter().copied()).collect();
        needed.sort_unstable();
        needed.dedup();
        let tuned = exec.map(needed.clone(), |s| {
            let data = standardized(&subjects[s].source_pool(plan)?)?;
            tuned_source(&data, plan, &subjects[s].id)
        });
        for (s, r) in needed.into_iter().zip(tuned) {
            let (point, model) = r?;
            source_models.insert(key(s, &point), model);
        }
    } else {
        let pools: BTreeMap<usize, FeatureMatrix> = exec
            .map(involved.clone(), |s| (s, subjects[s].train_pool(plan).and_then(|p| standardized(&p))))
            .into_iter()
            .map(|(s, r)| r.map(|p| (s, p)))
            .collect::<Result<_>>()?;
        if let Some(point) = plan.fixed_hp {
            let mut needed: Vec<usize> = roles.iter().flat_map(|(_, s)| s.iter().copied()).collect();
            needed.sort_unstable();
            needed.dedup();
            let models = exec.map(needed.clone(), |s| train_point(&pools[&s], &point));
            for (s, m) in needed.into_iter().zip(models) {
                source_models.insert(key(s, &point), m?);
            }
            target_points.iter_mut().for_each(|p| *p = Some(point));
        } else {
            let mut src: Vec<usize> = roles.iter().flat_map(|(_, s)| s.iter().copied()).collect();
            src.sort_unstable();
            src.dedup();
            // Every subject in the experiment scores the source models, so a
            // lone target of its kind still has evaluators other than itself.
            let as_pairs =
                |v: &[usize]| -> Vec<(String, FeatureMatrix)> { v.iter().map(|&s| (subjects[s].id.clone(), pools[&s].clone())).collect() };
            let table = CrossSubjectTable::build(&as_pairs(&src), &as_pairs(&involved), &plan.grid, exec)?;
            for (r, (t, sources)) in roles.iter().enumerate() {
                let point = table.select(&subjects[*t].id)?.point;
                target_points[r] = Some(point);
                for &s in sources {
                    let model = table
                        .model(&subjects[s].id, &point)
                        .ok_or_else(|| Error::InvalidParameter(format!("source {} failed to train", subjects[s].id)))?;
                    source_models.insert(key(s, &point), model.clone());
                }
            }
        }
    }

    let source_for = |s: usize, target_point: Option<GridPoint>| -> SourceHypothesis {
        let model = match target_point {
            Some(p) => &source_models[&key(s, &p)],
            None => source_models
                .range((s, 0, 0)..=(s, u64::MAX, u64::MAX))
                .next()
                .map(|(_, m)| m)
                .expect("tuned source model"),
        };
        SourceHypothesis::new(subjects[s].id.clone(), model.clone())
    };

    let mut tasks = Vec::new();
    for (r, (t, sources)) in roles.iter().enumerate() {
        for size in plan.sizes.sizes() {
            tasks.push(TaskSpec {
                target: *t,
                sources: sources.clone(),
                size,
                fixed: target_points[r],
            });
        }
    }
    let results = exec.map(tasks, |task| {
        let hyps: Vec<SourceHypothesis> = task.sources.iter().map(|&s| source_for(s, task.fixed)).collect();
        run_task(plan, &subjects[task.target], &hyps, &task)
    });
    let mut records = Vec::new();
    for r in results {
        records.extend(r?);
    }
    Ok(records)
}

/// Training rows for one size: a nested random prefix of the pool, or the
/// rows of a repetition subset.
fn training_subset(plan: &ExperimentPlan, target: &Subject, pool: &FeatureMatrix, size: &Size) -> Result<FeatureMatrix> {
    match size {
        Size::Samples(n) => {
            if *n > pool.len() {
                return Err(Error::TooFewSamples {
                    context: "training size exceeds the target training pool",
                    needed: *n,
                    found: pool.len(),
                });
            }
            let mut order: Vec<usize> = (0..pool.len()).collect();
            let mut rng = rng::derived_rng(
                plan.seed,
                &[hash_str(plan.setting.as_str()), hash_str("subset"), hash_str(&target.id)],
            );
            order.shuffle(&mut rng);
            let mut idx = order[..*n].to_vec();
            idx.sort_unstable();
            Ok(pool.select(&idx))
        }
        Size::Repetitions(reps) => {
            let fm = pool.filter(|_, r| reps.contains(&r));
            if fm.is_empty() {
                return Err(Error::EmptySplit("repetition subset"));
            }
            Ok(fm)
        }
    }
}

fn run_task(plan: &ExperimentPlan, target: &Subject, sources: &[SourceHypothesis], task: &TaskSpec) -> Result<Vec<EvalRecord>> {
    let test_reps = &plan.split.test_reps;
    let pool = target.train_pool(plan)?;
    let train = training_subset(plan, target, &pool, &task.size)?;
    check_no_leakage(&train, test_reps, "training")?;
    let test = target.test_set(plan)?;

    let standardizer = Standardizer::fit(&train)?;
    let train = standardizer.apply(&train)?;
    let test = standardizer.apply(&test)?;
    let train_task = TaskData::new(train.features.clone(), train.labels.clone(), sources)?;
    let test_task = TaskData::new(test.features.clone(), test.labels.clone(), sources)?;

    let size_text = format!("{}", task.size);
    let metric = plan.setting.metric();
    let cv = CvPlan {
        scheme: match plan.sizes {
            SizeAxis::Samples(_) => CvScheme::Shuffled { folds: plan.cv_folds },
            SizeAxis::Repetitions(_) => CvScheme::ByRepetition { fallback: plan.cv_folds },
        },
        metric,
        subsample: plan.tuning_subsample,
    };

    let mut records = Vec::with_capacity(plan.methods.len());
    for &method in &plan.methods {
        let task_seed = rng::mix(
            plan.seed,
            &[
                hash_str(plan.setting.as_str()),
                hash_str(&target.id),
                hash_str(method.as_str()),
                hash_str(&size_text),
            ],
        );
        let ctx = MethodContext::new(sources, plan.mkal_p, plan.mkal_epochs, task_seed)?;
        let point = match task.fixed.filter(|_| plan.setting == Setting::Original) {
            Some(p) => p,
            None => {
                check_no_leakage(&train, test_reps, "grid search")?;
                let grid = if method.uses_gamma() { plan.grid.clone() } else { plan.grid.c_only() };
                let fit = |p: &GridPoint, tr: &[usize], va: &[usize]| {
                    fit_predict(method, p, &ctx, &train_task.select(tr), &train_task.select(va))
                };
                grid_search(&train, &grid, &cv, &fit, task_seed)?.point
            }
        };
        let predicted = fit_predict(method, &point, &ctx, &train_task, &test_task)?;
        records.push(EvalRecord {
            setting: plan.setting,
            pairing: plan.pairing,
            target: target.id.clone(),
            method,
            size: task.size.clone(),
            metric,
            value: metric.evaluate(&test.labels, &predicted)?,
            seed: plan.seed,
            c: point.c,
            gamma: method.uses_gamma().then_some(point.gamma),
        });
    }
    Ok(records)
}
