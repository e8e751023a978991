use rand::seq::SliceRandom;
use rand::Rng;

use super::Task;

/// Draws batches from a reshuffled permutation of `0..len`. A request that
/// does not fit in the rest of the current permutation starts a new one,
/// so one batch never repeats an index.
#[derive(Clone, Debug)]
pub struct BatchStream {
    len: usize,
    perm: Vec<usize>,
    pos: usize,
}

impl BatchStream {
    pub fn new(len: usize) -> Self {
        BatchStream {
            len,
            perm: Vec::new(),
            pos: 0,
        }
    }

    pub fn take<R: Rng>(&mut self, n: usize, rng: &mut R) -> Vec<usize> {
        let n = n.min(self.len);
        if self.perm.is_empty() || self.pos + n > self.perm.len() {
            self.perm = (0..self.len).collect();
            self.perm.shuffle(rng);
            self.pos = 0;
        }
        let out = self.perm[self.pos..self.pos + n].to_vec();
        self.pos += n;
        out
    }
}

/// One optimizer step of multi-task training.
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduledBatch {
    pub task: usize,
    pub ids: Vec<usize>,
}

/// One epoch of relation-uniform batches: `ceil(total / batch_size)` steps.
pub fn multitask_schedule<E, R: Rng>(
    tasks: &[Task<E>],
    batch_size: usize,
    streams: &mut [BatchStream],
    rng: &mut R,
) -> Vec<ScheduledBatch> {
    let total: usize = tasks.iter().map(|t| t.examples.len()).sum();
    let steps = total.div_ceil(batch_size).max(1);
    (0..steps)
        .map(|_| {
            let task = rng.gen_range(0..tasks.len());
            ScheduledBatch {
                task,
                ids: streams[task].take(batch_size, rng),
            }
        })
        .collect()
}

/// The two disjoint batches of one task within a meta-learning round.
/// `d1` is the task's batch for the round: it serves both the look-ahead
/// step of the other tasks and this task's meta-test loss. `d2` feeds the
/// supervised loss.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskPlan {
    pub d1: Vec<usize>,
    pub d2: Vec<usize>,
}

/// One round: a plan for every task, in task order.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundPlan {
    pub tasks: Vec<TaskPlan>,
}

impl RoundPlan {
    /// The supervised batches in execution order; running multi-task
    /// training on these reproduces the round when β = 0.
    pub fn supervised_schedule(&self) -> Vec<ScheduledBatch> {
        self.tasks
            .iter()
            .enumerate()
            .map(|(task, p)| ScheduledBatch {
                task,
                ids: p.d2.clone(),
            })
            .collect()
    }
}

/// One epoch of rounds: `ceil(total / (2 · batch_size · tasks))` rounds,
/// each task's batch size capped at half its example count.
pub fn maml_rounds<E, R: Rng>(
    tasks: &[Task<E>],
    batch_size: usize,
    streams: &mut [BatchStream],
    rng: &mut R,
) -> Vec<RoundPlan> {
    let total: usize = tasks.iter().map(|t| t.examples.len()).sum();
    let rounds = total.div_ceil(2 * batch_size * tasks.len()).max(1);
    (0..rounds)
        .map(|_| RoundPlan {
            tasks: tasks
                .iter()
                .zip(streams.iter_mut())
                .map(|(t, s)| {
                    let b = batch_size.min(t.examples.len() / 2).max(1);
                    let mut ids = s.take(2 * b, rng);
                    let d2 = ids.split_off(b);
                    TaskPlan { d1: ids, d2 }
                })
                .collect(),
        })
        .collect()
}
