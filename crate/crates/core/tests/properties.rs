mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use cadrefine::bench::{success_at_k, Difficulty, MetricsReport, RunRow};
use cadrefine::executor::{mock_eval, mock_parse, pretty_print};
use cadrefine::llm::{render_prompt, PromptSet};
use cadrefine::scorer::stub_score;
use cadrefine::store::{EventKind, EventStore};
use cadrefine::FailureKind;
use common::geom::{program, raw_scene, voxel_volume};
use common::sim::{expected, quiet_after_pass, scenario};
use common::{assert_replays, versions, Scripted};

fn rows() -> impl Strategy<Value = Vec<RunRow>> {
    let diff = prop_oneof![
        Just(Difficulty::Easy),
        Just(Difficulty::Medium),
        Just(Difficulty::Hard)
    ];
    let outcome = prop_oneof![
        (0usize..6).prop_map(Ok),
        prop_oneof![
            Just(FailureKind::NonExecutable),
            Just(FailureKind::WrongStructure)
        ]
        .prop_map(Err),
    ];
    prop::collection::vec((diff, outcome), 1..80).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (d, o))| match o {
                Ok(at) => RunRow::solved(format!("q{i}"), d, at),
                Err(k) => RunRow::failed(format!("q{i}"), d, k),
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn dialect_round_trips(p in program()) {
        let text = pretty_print(&p);
        prop_assert_eq!(mock_parse(&text), Ok(p));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored(p in program()) {
        let noisy: String = pretty_print(&p)
            .lines()
            .map(|l| format!("  {l}   # note\n\n"))
            .collect();
        prop_assert_eq!(mock_parse(&noisy), Ok(p));
    }

    #[test]
    fn independent_solids_evaluate_in_any_order(
        prims in prop::collection::vec((0usize..3, 0.5f64..20.0, 0.5f64..20.0, [-30.0f64..30.0, -30.0f64..30.0, -30.0f64..30.0]), 1..6),
        seed in any::<u64>(),
    ) {
        let decls: Vec<String> = prims.iter().enumerate().map(|(i, (k, p, q, d))| {
            let head = match k {
                0 => format!("box b{i} {p} {q} {p}"),
                1 => format!("sphere b{i} {p}"),
                _ => format!("cylinder b{i} {p} {q}"),
            };
            format!("{head}\nmove b{i} {} {} {}", d[0], d[1], d[2])
        }).collect();
        let mut shuffled = decls.clone();
        let mut s = seed;
        for i in (1..shuffled.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        let eval = |d: &[String]| mock_eval(&mock_parse(&d.join("\n")).unwrap()).unwrap();
        let (a, b) = (eval(&decls), eval(&shuffled));
        prop_assert_eq!(&a.primitives, &b.primitives);
        prop_assert_eq!(a.bbox, b.bbox);
        prop_assert_eq!(a.approximate, b.approximate);
        prop_assert!((a.total_volume - b.total_volume).abs() <= 1e-9 * a.total_volume.max(1.0));
    }

    #[test]
    fn canonicalize_is_idempotent(s in raw_scene()) {
        let once = s.canonicalize();
        prop_assert_eq!(once.canonicalize(), once.clone());
        let ok = once.primitives.windows(2).all(|w| {
            (w[0].shape, &w[0].params) <= (w[1].shape, &w[1].params)
        });
        prop_assert!(ok, "not sorted by shape then params");
    }

    #[test]
    fn stub_score_is_symmetric_and_bounded(a in raw_scene(), b in raw_scene()) {
        let (a, b) = (a.canonicalize(), b.canonicalize());
        let ab = stub_score(&a, &b);
        prop_assert_eq!(ab, stub_score(&b, &a));
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(stub_score(&a, &a), 1.0);
    }

    #[test]
    fn prompts_are_injective_per_binding(x in ".{0,40}", y in ".{0,40}") {
        prop_assume!(x != y);
        let set = PromptSet::builtin("mock").unwrap();
        for tpl in [&set.initial, &set.error_refine, &set.caption_refine] {
            let used = tpl.used_placeholders();
            for slot in &used {
                let bind = |v: &str| -> BTreeMap<String, String> {
                    used.iter()
                        .map(|p| (p.to_string(), if p == slot { v.to_string() } else { format!("<{p}>") }))
                        .collect()
                };
                let px = render_prompt(tpl, &bind(&x)).unwrap();
                let py = render_prompt(tpl, &bind(&y)).unwrap();
                prop_assert_ne!(px, py, "{} / {}", tpl.name, slot);
            }
        }
    }

    #[test]
    fn success_at_k_is_monotone(rows in rows()) {
        let report = MetricsReport::from_rows(&rows, 5).unwrap();
        report.check_invariants().map_err(TestCaseError::fail)?;
        for k in 0..=report.k_max() {
            let solved = rows.iter().filter(|r| r.solved_at.is_some_and(|s| s <= k)).count() as u64;
            prop_assert_eq!(report.success_at[k].num, solved);
            prop_assert_eq!(success_at_k(&rows, k).unwrap(), report.success_at[k]);
        }
        for w in report.success_at.windows(2) {
            prop_assert!(w[0].num <= w[1].num);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn box_booleans_match_voxel_count(
        sa in [2.0f64..10.0, 2.0f64..10.0, 2.0f64..10.0],
        sb in [2.0f64..10.0, 2.0f64..10.0, 2.0f64..10.0],
        d in [-8.0f64..8.0, -8.0f64..8.0, -8.0f64..8.0],
        cut in any::<bool>(),
    ) {
        let op = if cut { "cut" } else { "union" };
        let src = format!(
            "box a {} {} {}\nbox b {} {} {}\nmove b {} {} {}\n{op} u a b",
            sa[0], sa[1], sa[2], sb[0], sb[1], sb[2], d[0], d[1], d[2]
        );
        let scene = mock_eval(&mock_parse(&src).unwrap()).unwrap();
        let a = ([0.0; 3], sa);
        let b = (d, [d[0] + sb[0], d[1] + sb[1], d[2] + sb[2]]);
        let oracle = voxel_volume(a, b, cut, 0.01);
        let rel = (scene.total_volume - oracle).abs() / oracle.max(1e-9);
        prop_assert!(rel <= 0.02, "{src}\nevaluator {} voxels {}", scene.total_volume, oracle);
        prop_assert!(!scene.approximate);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn random_runs_match_reference_model(sc in scenario()) {
        let want = expected(&sc);
        let s = Scripted::new(sc.entries(), common::sim::TARGET);
        let store = cadrefine::store::MemoryStore::new();
        let rec = s.run("a 10 mm cube", &sc.config(), &store);
        assert_replays(&store, &rec);
        prop_assert_eq!(rec.status, want.status);
        prop_assert_eq!(rec.failure_kind, want.failure_kind);
        prop_assert_eq!(versions(&rec), want.versions.clone());
        prop_assert_eq!(s.calls(), want.provider_calls);
        let events = store.events(&rec.run_id).unwrap();
        let generated = events.iter().filter(|e| e.body.kind() == EventKind::MacroGenerated).count();
        prop_assert_eq!(generated, want.logical_calls);
        prop_assert!(generated as u64 <= sc.config().llm_call_budget());
        prop_assert!(quiet_after_pass(&events));
        prop_assert_eq!(rec.first_passing_attempt(), want.solved_at);
    }
}
