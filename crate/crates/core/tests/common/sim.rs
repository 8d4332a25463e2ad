//! Randomized pipeline scenarios plus a small reference model of what each
//! scenario must produce.

use proptest::prelude::*;

use cadrefine::llm::ReplayEntry;
use cadrefine::pipeline::PipelineConfig;
use cadrefine::store::{EventBody, EventKind, RunEvent};
use cadrefine::{FailureKind, RunStatus};

use super::{fail, mock_config, reply};

pub const TARGET: &str = "box c 10 10 10";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    /// Matches the target exactly (score 1).
    Good,
    /// Target plus one stray sphere (score 1/2).
    Half,
    /// Executes, shares nothing with the target (score 0).
    Wrong,
    /// Does not parse.
    Broken,
    /// No fenced block.
    Junk,
    /// Provider error.
    Fail,
}

impl Step {
    pub fn entry(self) -> ReplayEntry {
        match self {
            Step::Good => reply(TARGET),
            Step::Half => reply(&format!("{TARGET}\nsphere s 3\nmove s 0 0 20")),
            Step::Wrong => reply("sphere s 4"),
            Step::Broken => reply("box b 1 1"),
            Step::Junk => ReplayEntry::Response("I would start with a cube.".into()),
            Step::Fail => fail("upstream 503"),
        }
    }

    fn score(self) -> f64 {
        match self {
            Step::Good => 1.0,
            Step::Half => 0.5,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub error_iter: u32,
    pub model_iter: u32,
    pub threshold: f64,
    pub steps: Vec<Step>,
}

impl Scenario {
    pub fn config(&self) -> PipelineConfig {
        PipelineConfig {
            threshold: self.threshold,
            ..mock_config(self.error_iter, self.model_iter)
        }
    }

    pub fn entries(&self) -> Vec<ReplayEntry> {
        self.steps.iter().map(|s| s.entry()).collect()
    }
}

fn step() -> impl Strategy<Value = Step> {
    prop_oneof![
        4 => Just(Step::Good),
        3 => Just(Step::Half),
        4 => Just(Step::Wrong),
        6 => Just(Step::Broken),
        1 => Just(Step::Junk),
        1 => Just(Step::Fail),
    ]
}

pub fn scenario() -> impl Strategy<Value = Scenario> {
    (
        0u32..4,
        0u32..4,
        prop::sample::select(vec![0.3, 0.5, 0.7, 0.9, 0.99]),
    )
        .prop_flat_map(|(e, m, threshold)| {
            let budget = (1 + m + (m + 1) * e) as usize;
            prop::collection::vec(step(), 0..=budget + 3).prop_map(move |steps| Scenario {
                error_iter: e,
                model_iter: m,
                threshold,
                steps,
            })
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expected {
    pub status: RunStatus,
    pub failure_kind: Option<FailureKind>,
    /// Macro versions per attempt.
    pub versions: Vec<usize>,
    pub provider_calls: usize,
    /// Generations that produced a macro, i.e. calls counted against the budget.
    pub logical_calls: usize,
    pub solved_at: Option<usize>,
}

struct Model<'a> {
    steps: &'a [Step],
    cursor: usize,
    logical: usize,
}

impl Model<'_> {
    /// One generation: a reply, or a single reprompt after an unfenced reply.
    fn generate(&mut self) -> Option<Step> {
        for round in 0..2 {
            let s = *self.steps.get(self.cursor)?;
            self.cursor += 1;
            match s {
                Step::Fail => return None,
                Step::Junk if round == 0 => continue,
                Step::Junk => return None,
                other => {
                    self.logical += 1;
                    return Some(other);
                }
            }
        }
        None
    }
}

/// Reference outcome, written independently of the pipeline code.
pub fn expected(sc: &Scenario) -> Expected {
    let mut model = Model {
        steps: &sc.steps,
        cursor: 0,
        logical: 0,
    };
    let mut versions = Vec::new();
    let (status, failure_kind, solved_at) = 'run: {
        for attempt in 0..=sc.model_iter as usize {
            versions.push(0);
            let Some(mut current) = model.generate() else {
                break 'run (RunStatus::Aborted, None, None);
            };
            versions[attempt] = 1;
            while current == Step::Broken && versions[attempt] <= sc.error_iter as usize {
                let Some(next) = model.generate() else {
                    break 'run (RunStatus::Aborted, None, None);
                };
                current = next;
                versions[attempt] += 1;
            }
            let last = attempt == sc.model_iter as usize;
            if current == Step::Broken {
                if last {
                    break 'run (RunStatus::Failure, Some(FailureKind::NonExecutable), None);
                }
                continue;
            }
            if current.score() > sc.threshold {
                break 'run (RunStatus::Success, None, Some(attempt));
            }
            if last {
                break 'run (RunStatus::Failure, Some(FailureKind::WrongStructure), None);
            }
        }
        unreachable!("the last attempt always decides")
    };
    if status == RunStatus::Aborted && versions.last() == Some(&0) {
        // an attempt whose first generation failed is not recorded
        versions.pop();
    }
    Expected {
        status,
        failure_kind,
        versions,
        provider_calls: model.cursor,
        logical_calls: model.logical,
        solved_at,
    }
}

/// On success, nothing but `run_finished` may follow the passing score.
pub fn quiet_after_pass(events: &[RunEvent]) -> bool {
    let finished_ok = events.iter().any(|e| {
        matches!(
            e.body,
            EventBody::RunFinished {
                status: RunStatus::Success,
                ..
            }
        )
    });
    if !finished_ok {
        return true;
    }
    let Some(last_score) = events
        .iter()
        .rposition(|e| e.body.kind() == EventKind::Scored)
    else {
        return false;
    };
    events[last_score + 1..].iter().all(|e| {
        matches!(
            e.body.kind(),
            EventKind::RunFinished | EventKind::VerdictRecorded
        )
    })
}
