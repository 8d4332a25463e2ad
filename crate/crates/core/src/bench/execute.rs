use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use super::{DatasetItem, Difficulty, RunRow};
use crate::executor::MockExecutor;
use crate::llm::{LlmClient, PromptSet, ProviderKind, ReplayProvider, ScriptBook};
use crate::pipeline::{run_query, OwnedDeps, PipelineConfig, RunRecord};
use crate::scorer::StubScorer;
use crate::store::EventStore;

pub type DepsFactory<'a> =
    dyn Fn(&DatasetItem, &PipelineConfig) -> Result<OwnedDeps, String> + Sync + 'a;

#[derive(Debug)]
pub struct ItemOutcome {
    pub item_id: String,
    pub difficulty: Difficulty,
    pub result: Result<RunRecord, String>,
}

impl ItemOutcome {
    /// `None` for runs that did not reach success or failure.
    pub fn row(&self) -> Option<RunRow> {
        let rec = self.result.as_ref().ok()?;
        RunRow::from_record(&self.item_id, self.difficulty, rec)
    }
}

/// Replay LLM keyed by item id, mock executor, and stub scorer against the
/// item's expected scene.
pub fn hermetic_deps(
    book: Arc<ScriptBook>,
) -> impl Fn(&DatasetItem, &PipelineConfig) -> Result<OwnedDeps, String> + Sync {
    move |item, config| {
        let provider = ReplayProvider::from_book(&book, &item.id)?;
        let prompts = PromptSet::resolve(&config.prompt_set).map_err(|e| e.to_string())?;
        let scorer = match &item.expected_scene {
            Some(scene) => StubScorer::new(scene.clone()),
            None => StubScorer::default(),
        };
        Ok(OwnedDeps {
            llm: LlmClient::new(Arc::new(provider), prompts),
            executor: Box::new(MockExecutor),
            scorer: Box::new(scorer),
        })
    }
}

/// Runs every item, at most `jobs` at a time. Outcomes keep dataset order.
pub fn execute_dataset(
    items: &[DatasetItem],
    config: &PipelineConfig,
    store: &dyn EventStore,
    jobs: usize,
    make_deps: &DepsFactory<'_>,
) -> Vec<ItemOutcome> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<ItemOutcome>>> = Mutex::new(items.iter().map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                let outcome = run_item(item, config, store, make_deps);
                slots.lock().unwrap()[i] = Some(outcome);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|o| o.expect("every item ran"))
        .collect()
}

fn run_item(
    item: &DatasetItem,
    config: &PipelineConfig,
    store: &dyn EventStore,
    make_deps: &DepsFactory<'_>,
) -> ItemOutcome {
    let mut config = config.clone();
    if config.llm_provider.kind == ProviderKind::Replay {
        config.llm_provider.script_name = Some(item.id.clone());
    }
    let result = make_deps(item, &config).and_then(|deps| {
        run_query(&item.query, &config, &deps.borrow(store, None)).map_err(|e| e.to_string())
    });
    ItemOutcome {
        item_id: item.id.clone(),
        difficulty: item.difficulty,
        result,
    }
}
