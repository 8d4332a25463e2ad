use std::collections::BTreeMap;

use super::{Caption, Score, ScoreBackend, Scorer, ScorerError};
use crate::executor::{Primitive, RenderArtifact, SceneDescriptor, Shape};

type Signature = (Shape, Vec<i64>, [i64; 3]);

/// Params rounded to 3 decimals, position to 1 decimal, as integer keys.
fn signature(p: &Primitive) -> Signature {
    (
        p.shape,
        p.params
            .iter()
            .map(|v| (v * 1000.0).round() as i64)
            .collect(),
        p.position.map(|v| (v * 10.0).round() as i64),
    )
}

fn multiset(scene: &SceneDescriptor) -> BTreeMap<Signature, usize> {
    let mut m = BTreeMap::new();
    for p in &scene.primitives {
        *m.entry(signature(p)).or_insert(0) += 1;
    }
    m
}

/// Multiset Jaccard similarity of primitive signatures. Two empty scenes score 1.
pub fn stub_score(actual: &SceneDescriptor, expected: &SceneDescriptor) -> f64 {
    let a = multiset(actual);
    let b = multiset(expected);
    let mut inter = 0usize;
    let mut union = 0usize;
    for key in a.keys().chain(b.keys().filter(|k| !a.contains_key(*k))) {
        let ca = a.get(key).copied().unwrap_or(0);
        let cb = b.get(key).copied().unwrap_or(0);
        inter += ca.min(cb);
        union += ca.max(cb);
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

fn mm(v: f64) -> String {
    let s = format!("{:.3}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn describe(p: &Primitive) -> String {
    let body = match p.shape {
        Shape::Box => format!(
            "a box of {}x{}x{} mm",
            mm(p.params[0]),
            mm(p.params[1]),
            mm(p.params[2])
        ),
        Shape::Sphere => format!("a sphere of radius {} mm", mm(p.params[0])),
        Shape::Cylinder => format!(
            "a cylinder of radius {} mm and height {} mm",
            mm(p.params[0]),
            mm(p.params[1])
        ),
    };
    if p.is_cut_tool() {
        format!("{body} cut away")
    } else {
        body
    }
}

/// Deterministic description of a scene, e.g.
/// "a box of 10x10x10 mm above a sphere of radius 8 mm".
pub fn stub_caption(scene: &SceneDescriptor) -> String {
    const EPS: f64 = 1e-6;
    let mut out = String::new();
    let mut prev: Option<&Primitive> = None;
    for p in &scene.primitives {
        match prev {
            None => out.push_str(&describe(p)),
            Some(q) => {
                let (qb, pb) = (q.aabb(), p.aabb());
                let rel = if qb.min[2] >= pb.max[2] - EPS {
                    "above"
                } else if qb.max[2] <= pb.min[2] + EPS {
                    "below"
                } else {
                    "and"
                };
                out.push(' ');
                out.push_str(rel);
                out.push(' ');
                out.push_str(&describe(p));
            }
        }
        prev = Some(p);
    }
    if out.is_empty() {
        "an empty scene".into()
    } else {
        out
    }
}

/// Scores descriptor renders against an expected scene.
#[derive(Debug, Clone, Default)]
pub struct StubScorer {
    pub expected: Option<SceneDescriptor>,
}

impl StubScorer {
    pub fn new(expected: SceneDescriptor) -> Self {
        Self {
            expected: Some(expected.canonicalize()),
        }
    }

    fn scene<'a>(&self, render: &'a RenderArtifact) -> Result<&'a SceneDescriptor, ScorerError> {
        render.scene.as_ref().ok_or_else(|| {
            ScorerError::Config("stub scorer needs a descriptor render, got a PNG".into())
        })
    }
}

impl Scorer for StubScorer {
    fn score(&self, render: &RenderArtifact, query: &str) -> Result<Score, ScorerError> {
        if query.is_empty() {
            return Err(ScorerError::EmptyQuery);
        }
        let expected = self
            .expected
            .as_ref()
            .ok_or_else(|| ScorerError::Config("stub scorer has no expected scene".into()))?;
        let actual = self.scene(render)?.canonicalize();
        Ok(Score {
            value: stub_score(&actual, expected),
            backend: ScoreBackend::Stub,
        })
    }

    fn caption(&self, render: &RenderArtifact) -> Result<Caption, ScorerError> {
        Ok(Caption::machine(stub_caption(self.scene(render)?)))
    }
}
