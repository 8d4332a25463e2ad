#![allow(dead_code)]

pub mod geom;
pub mod sim;

use std::sync::Arc;

use cadrefine::executor::{mock_eval, mock_parse, MockExecutor, SceneDescriptor};
use cadrefine::feedback::Mailbox;
use cadrefine::llm::{LlmClient, PromptSet, ReplayEntry, ReplayProvider};
use cadrefine::pipeline::{OwnedDeps, PipelineConfig, RunSession};
use cadrefine::scorer::StubScorer;
use cadrefine::store::{load_run, EventStore, MemoryStore};
use cadrefine::RunRecord;

/// A well-formed LLM reply: plan text followed by one fenced macro.
pub fn reply(src: &str) -> ReplayEntry {
    ReplayEntry::Response(format!("1. Build the part.\n\n```\n{src}\n```"))
}

pub fn fail(msg: &str) -> ReplayEntry {
    ReplayEntry::Failure { error: msg.into() }
}

pub fn scene(src: &str) -> SceneDescriptor {
    mock_eval(&mock_parse(src).expect("parses")).expect("evaluates")
}

pub fn mock_config(error_iter: u32, model_iter: u32) -> PipelineConfig {
    PipelineConfig {
        error_iter,
        model_iter,
        ..PipelineConfig::mock("unused.json", "unused")
    }
}

pub struct Scripted {
    pub provider: Arc<ReplayProvider>,
    pub deps: OwnedDeps,
}

impl Scripted {
    pub fn new(entries: Vec<ReplayEntry>, expected: &str) -> Self {
        let provider = Arc::new(ReplayProvider::new("test", entries));
        let deps = OwnedDeps {
            llm: LlmClient::new(provider.clone(), PromptSet::builtin("mock").unwrap()),
            executor: Box::new(MockExecutor),
            scorer: Box::new(StubScorer::new(scene(expected))),
        };
        Self { provider, deps }
    }

    pub fn run(&self, query: &str, config: &PipelineConfig, store: &dyn EventStore) -> RunRecord {
        self.run_with(query, config, store, None)
    }

    pub fn run_with(
        &self,
        query: &str,
        config: &PipelineConfig,
        store: &dyn EventStore,
        mailbox: Option<&Mailbox>,
    ) -> RunRecord {
        RunSession::begin(store, None, query, config.clone())
            .unwrap()
            .drive(&self.deps.borrow(store, mailbox))
            .unwrap()
    }

    pub fn calls(&self) -> usize {
        self.provider.calls()
    }
}

/// Runs a script to completion against a fresh in-memory store.
pub fn run_script(
    entries: Vec<ReplayEntry>,
    expected: &str,
    config: &PipelineConfig,
) -> (RunRecord, MemoryStore, usize) {
    let s = Scripted::new(entries, expected);
    let store = MemoryStore::new();
    let rec = s.run("a test part", config, &store);
    (rec, store, s.calls())
}

/// The live record must equal a replay of its event log, and be internally consistent.
pub fn assert_replays(store: &dyn EventStore, rec: &RunRecord) {
    let replayed = load_run(store, &rec.run_id).expect("log replays");
    assert_eq!(&replayed, rec, "replay differs from live record");
    rec.check_invariants().expect("invariants hold");
}

pub fn versions(rec: &RunRecord) -> Vec<usize> {
    rec.attempts
        .iter()
        .map(|a| a.macro_versions.len())
        .collect()
}

// Five-point star plate, drawn with axis-aligned bars on a 2 mm plate.
pub const PENTAGON_OPEN: &str = "\
box e1 40 4 2
box e2 4 30 2
move e2 36 4 0
box e3 4 30 2
box e4 20 4 2
move e4 0 34 0";

pub const PENTAGON_CLOSED: &str = "\
box e1 40 4 2
box e2 4 30 2
move e2 36 4 0
box e3 4 30 2
box e4 20 4 2
move e4 0 34 0
box e5 20 4 2
move e5 20 34 0";

pub const STAR: &str = "\
cylinder hub 8 2
box a1 4 20 2
move a1 -2 8 0
box a2 4 20 2
move a2 -2 -28 0
box a3 20 4 2
move a3 8 -2 0
box a4 20 4 2
move a4 -28 -2 0
box a5 14 14 2
move a5 6 6 0";
