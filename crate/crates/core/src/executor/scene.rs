use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dialect::{Command, Program};

/// Primitive kinds; declaration order is the canonical sort order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Box,
    Sphere,
    Cylinder,
}

impl Shape {
    pub fn as_str(self) -> &'static str {
        match self {
            Shape::Box => "box",
            Shape::Sphere => "sphere",
            Shape::Cylinder => "cylinder",
        }
    }
}

/// One primitive solid.
///
/// `position` is the minimum corner for boxes, the centre for spheres and
/// the base centre for cylinders (axis along +z). `booleans` records which
/// boolean operations the primitive took part in, outermost last, as
/// `union:<name>`, `cut:<name>:base` or `cut:<name>:tool`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub shape: Shape,
    pub params: Vec<f64>,
    pub position: [f64; 3],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub booleans: Vec<String>,
}

impl Primitive {
    pub fn aabb(&self) -> Aabb {
        let p = self.position;
        match self.shape {
            Shape::Box => Aabb {
                min: p,
                max: [
                    p[0] + self.params[0],
                    p[1] + self.params[1],
                    p[2] + self.params[2],
                ],
            },
            Shape::Sphere => {
                let r = self.params[0];
                Aabb {
                    min: [p[0] - r, p[1] - r, p[2] - r],
                    max: [p[0] + r, p[1] + r, p[2] + r],
                }
            }
            Shape::Cylinder => {
                let (r, h) = (self.params[0], self.params[1]);
                Aabb {
                    min: [p[0] - r, p[1] - r, p[2]],
                    max: [p[0] + r, p[1] + r, p[2] + h],
                }
            }
        }
    }

    pub fn volume(&self) -> f64 {
        match self.shape {
            Shape::Box => self.params[0] * self.params[1] * self.params[2],
            Shape::Sphere => 4.0 / 3.0 * PI * self.params[0].powi(3),
            Shape::Cylinder => PI * self.params[0].powi(2) * self.params[1],
        }
    }

    pub fn is_cut_tool(&self) -> bool {
        self.booleans
            .iter()
            .any(|t| t.starts_with("cut:") && t.ends_with(":tool"))
    }

    fn sort_key(&self) -> (Shape, Vec<i64>, [i64; 3]) {
        (
            self.shape,
            self.params
                .iter()
                .map(|v| (v * 1000.0).round() as i64)
                .collect(),
            self.position.map(|v| (v * 1000.0).round() as i64),
        )
    }
}

/// Axis-aligned bounding box in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub const EMPTY: Aabb = Aabb {
        min: [0.0; 3],
        max: [0.0; 3],
    };

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: std::array::from_fn(|i| self.min[i].min(other.min[i])),
            max: std::array::from_fn(|i| self.max[i].max(other.max[i])),
        }
    }

    pub fn contains(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.min[i] && other.max[i] <= self.max[i])
    }

    /// True when the interiors overlap.
    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] < other.max[i] && other.min[i] < self.max[i])
    }
}

/// Canonical geometric summary of an executed mock macro.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDescriptor {
    pub primitives: Vec<Primitive>,
    pub bbox: Aabb,
    pub total_volume: f64,
    /// Set when a boolean volume could not be computed exactly.
    #[serde(default)]
    pub approximate: bool,
}

impl Default for SceneDescriptor {
    fn default() -> Self {
        Self {
            primitives: Vec::new(),
            bbox: Aabb::EMPTY,
            total_volume: 0.0,
            approximate: false,
        }
    }
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    let r = (v * scale).round() / scale;
    // normalise -0.0
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

impl SceneDescriptor {
    pub fn from_primitives(
        primitives: Vec<Primitive>,
        total_volume: f64,
        approximate: bool,
    ) -> Self {
        let bbox = bbox_of(&primitives);
        Self {
            primitives,
            bbox,
            total_volume,
            approximate,
        }
        .canonicalize()
    }

    /// Rounds params and positions to 3 decimals and sorts primitives by
    /// (shape, params, position). Idempotent.
    pub fn canonicalize(&self) -> SceneDescriptor {
        let mut primitives: Vec<Primitive> = self
            .primitives
            .iter()
            .map(|p| Primitive {
                shape: p.shape,
                params: p.params.iter().map(|v| round_to(*v, 3)).collect(),
                position: p.position.map(|v| round_to(v, 3)),
                booleans: p.booleans.clone(),
            })
            .collect();
        primitives.sort_by(|a, b| {
            a.sort_key()
                .cmp(&b.sort_key())
                .then_with(|| a.booleans.cmp(&b.booleans))
        });
        let bbox = bbox_of(&primitives);
        SceneDescriptor {
            primitives,
            bbox,
            total_volume: self.total_volume,
            approximate: self.approximate,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }
}

fn bbox_of(primitives: &[Primitive]) -> Aabb {
    primitives
        .iter()
        .map(Primitive::aabb)
        .reduce(|a, b| a.union(&b))
        .unwrap_or(Aabb::EMPTY)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("numeric overflow while evaluating '{0}'")]
    Overflow(String),
    #[error("internal: name '{0}' not in scope")]
    Scope(String),
}

#[derive(Debug, Clone)]
enum Solid {
    Leaf(Primitive),
    Union(String, Box<Solid>, Box<Solid>),
    Cut(String, Box<Solid>, Box<Solid>),
}

impl Solid {
    fn translate(&mut self, d: [f64; 3]) {
        match self {
            Solid::Leaf(p) => {
                for (x, dx) in p.position.iter_mut().zip(d) {
                    *x += dx;
                }
            }
            Solid::Union(_, a, b) | Solid::Cut(_, a, b) => {
                a.translate(d);
                b.translate(d);
            }
        }
    }

    fn aabb(&self) -> Aabb {
        match self {
            Solid::Leaf(p) => p.aabb(),
            Solid::Union(_, a, b) => a.aabb().union(&b.aabb()),
            Solid::Cut(_, a, _) => a.aabb(),
        }
    }

    fn leaves(&self, outer: &[String], out: &mut Vec<Primitive>) {
        match self {
            Solid::Leaf(p) => {
                let mut p = p.clone();
                p.booleans.extend(outer.iter().rev().cloned());
                out.push(p);
            }
            Solid::Union(name, a, b) => {
                let mut tags = outer.to_vec();
                tags.push(format!("union:{name}"));
                a.leaves(&tags, out);
                b.leaves(&tags, out);
            }
            Solid::Cut(name, a, b) => {
                let mut base = outer.to_vec();
                base.push(format!("cut:{name}:base"));
                a.leaves(&base, out);
                let mut tool = outer.to_vec();
                tool.push(format!("cut:{name}:tool"));
                b.leaves(&tool, out);
            }
        }
    }

    fn boxes(&self, out: &mut Vec<Aabb>) -> bool {
        match self {
            Solid::Leaf(p) if p.shape == Shape::Box => {
                out.push(p.aabb());
                true
            }
            Solid::Leaf(_) => false,
            Solid::Union(_, a, b) | Solid::Cut(_, a, b) => a.boxes(out) & b.boxes(out),
        }
    }

    /// Point membership; only meaningful for box-only trees.
    fn contains_point(&self, q: [f64; 3]) -> bool {
        match self {
            Solid::Leaf(p) => {
                let b = p.aabb();
                (0..3).all(|i| b.min[i] < q[i] && q[i] < b.max[i])
            }
            Solid::Union(_, a, b) => a.contains_point(q) || b.contains_point(q),
            Solid::Cut(_, a, b) => a.contains_point(q) && !b.contains_point(q),
        }
    }

    /// Volume and whether it is exact.
    fn volume(&self) -> (f64, bool) {
        if let Some(v) = box_only_volume(&[self], |pt| self.contains_point(pt)) {
            return (v, true);
        }
        match self {
            Solid::Leaf(p) => (p.volume(), true),
            Solid::Union(_, a, b) => {
                let (va, ea) = a.volume();
                let (vb, eb) = b.volume();
                let (ov, eo) = overlap(a, b);
                (va + vb - ov, ea && eb && eo)
            }
            Solid::Cut(_, a, b) => {
                let (va, ea) = a.volume();
                let (ov, eo) = overlap(a, b);
                ((va - ov).max(0.0), ea && eo)
            }
        }
    }
}

/// Exact volume of a region bounded by axis-aligned boxes, by coordinate
/// compression. `None` if any leaf is not a box.
fn box_only_volume(solids: &[&Solid], inside: impl Fn([f64; 3]) -> bool) -> Option<f64> {
    let mut boxes = Vec::new();
    for s in solids {
        if !s.boxes(&mut boxes) {
            return None;
        }
    }
    let axis = |i: usize| {
        let mut c: Vec<f64> = boxes.iter().flat_map(|b| [b.min[i], b.max[i]]).collect();
        c.sort_by(f64::total_cmp);
        c.dedup();
        c
    };
    let (xs, ys, zs) = (axis(0), axis(1), axis(2));
    let mut total = 0.0;
    for x in xs.windows(2) {
        for y in ys.windows(2) {
            for z in zs.windows(2) {
                let centre = [
                    (x[0] + x[1]) / 2.0,
                    (y[0] + y[1]) / 2.0,
                    (z[0] + z[1]) / 2.0,
                ];
                if inside(centre) {
                    total += (x[1] - x[0]) * (y[1] - y[0]) * (z[1] - z[0]);
                }
            }
        }
    }
    Some(total)
}

/// Volume of a ∩ b, exact for disjoint bounds, box-only operands, or a
/// single box containing the other operand's bounds. Otherwise 0, inexact.
fn overlap(a: &Solid, b: &Solid) -> (f64, bool) {
    if !a.aabb().intersects(&b.aabb()) {
        return (0.0, true);
    }
    if let Some(v) = box_only_volume(&[a, b], |q| a.contains_point(q) && b.contains_point(q)) {
        return (v, true);
    }
    for (outer, inner) in [(a, b), (b, a)] {
        if let Solid::Leaf(p) = outer {
            if p.shape == Shape::Box && p.aabb().contains(&inner.aabb()) {
                return inner.volume();
            }
        }
    }
    (0.0, false)
}

/// Evaluates a parsed program into its canonical scene.
pub fn evaluate(program: &Program) -> Result<SceneDescriptor, EvalError> {
    let mut live: HashMap<String, Solid> = HashMap::new();
    let mut order: Vec<String> = Vec::new();

    for cmd in &program.commands {
        let take = |live: &mut HashMap<String, Solid>, n: &str| {
            live.remove(n)
                .ok_or_else(|| EvalError::Scope(n.to_string()))
        };
        let (name, solid) = match cmd {
            Command::Box { name, size } => (name, leaf(Shape::Box, size.to_vec())),
            Command::Sphere { name, radius } => (name, leaf(Shape::Sphere, vec![*radius])),
            Command::Cylinder {
                name,
                radius,
                height,
            } => (name, leaf(Shape::Cylinder, vec![*radius, *height])),
            Command::Move { name, offset } => {
                live.get_mut(name)
                    .ok_or_else(|| EvalError::Scope(name.clone()))?
                    .translate(*offset);
                continue;
            }
            Command::Union { name, a, b } => {
                let sa = take(&mut live, a)?;
                let sb = take(&mut live, b)?;
                (name, Solid::Union(name.clone(), Box::new(sa), Box::new(sb)))
            }
            Command::Cut { name, a, b } => {
                let sa = take(&mut live, a)?;
                let sb = take(&mut live, b)?;
                (name, Solid::Cut(name.clone(), Box::new(sa), Box::new(sb)))
            }
        };
        live.insert(name.clone(), solid);
        order.push(name.clone());
    }

    let mut primitives = Vec::new();
    let mut total = 0.0;
    let mut exact = true;
    for name in order {
        let Some(solid) = live.get(&name) else {
            continue;
        };
        let (v, e) = solid.volume();
        total += v;
        exact &= e;
        let start = primitives.len();
        solid.leaves(&[], &mut primitives);
        let finite = primitives[start..].iter().all(|p| {
            let b = p.aabb();
            b.min.iter().chain(b.max.iter()).all(|c| c.is_finite()) && p.volume().is_finite()
        });
        if !finite || !v.is_finite() {
            return Err(EvalError::Overflow(name));
        }
    }
    if !total.is_finite() {
        return Err(EvalError::Overflow("scene".into()));
    }
    Ok(SceneDescriptor::from_primitives(primitives, total, !exact))
}

fn leaf(shape: Shape, params: Vec<f64>) -> Solid {
    Solid::Leaf(Primitive {
        shape,
        params,
        position: [0.0; 3],
        booleans: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::dialect::parse;
    use super::*;

    fn eval(src: &str) -> SceneDescriptor {
        evaluate(&parse(src).unwrap()).unwrap()
    }

    #[test]
    fn single_box() {
        let s = eval("box b1 10 10 10");
        assert_eq!(s.primitives.len(), 1);
        assert_eq!(s.bbox.min, [0.0; 3]);
        assert_eq!(s.bbox.max, [10.0; 3]);
        assert_eq!(s.total_volume, 1000.0);
        assert!(!s.approximate);
    }

    #[test]
    fn sphere_volume() {
        // (4/3) * pi * 8^3 = 2144.660584850632
        let s = eval("sphere s 8");
        assert!((s.total_volume - 2_144.660_584_850_632).abs() < 1e-9);
    }

    #[test]
    fn cube_atop_sphere() {
        let s = eval("sphere s 8\nbox c 10 10 10\nmove c -5 -5 8");
        assert_eq!(s.primitives[0].shape, Shape::Box);
        assert_eq!(s.primitives[1].shape, Shape::Sphere);
        // cube spans x,y in [-5,5], z in [8,18]; sphere spans [-8,8]^3
        assert_eq!(s.bbox.min, [-8.0, -8.0, -8.0]);
        assert_eq!(s.bbox.max, [8.0, 8.0, 18.0]);
    }

    #[test]
    fn union_of_identical_boxes() {
        let s = eval("box a 10 10 10\nbox b 10 10 10\nunion u a b");
        assert_eq!(s.total_volume, 1000.0);
        assert!(!s.approximate);
        assert!(s.primitives.iter().all(|p| p.booleans == ["union:u"]));
    }

    #[test]
    fn box_cut_exact() {
        let s = eval("box a 10 10 10\nbox b 10 10 10\nmove b 5 0 0\ncut c a b");
        assert_eq!(s.total_volume, 500.0);
        assert!(!s.approximate);
        let tool = s.primitives.iter().find(|p| p.is_cut_tool()).unwrap();
        assert_eq!(tool.position, [5.0, 0.0, 0.0]);
    }

    #[test]
    fn sphere_inside_box_cut_is_exact() {
        let s = eval("box a 20 20 20\nsphere s 5\nmove s 10 10 10\ncut c a s");
        let expected = 8000.0 - 4.0 / 3.0 * PI * 125.0;
        assert!((s.total_volume - expected).abs() < 1e-9);
        assert!(!s.approximate);
    }

    #[test]
    fn partial_sphere_overlap_is_flagged() {
        let s = eval("box a 10 10 10\nsphere s 5\nunion u a s");
        assert!(s.approximate);
        assert!((s.total_volume - (1000.0 + 4.0 / 3.0 * PI * 125.0)).abs() < 1e-9);
    }

    #[test]
    fn disjoint_mixed_union_is_exact() {
        let s = eval("box a 10 10 10\nsphere s 5\nmove s 30 0 0\nunion u a s");
        assert!(!s.approximate);
    }

    #[test]
    fn nested_box_booleans() {
        // frame: 10x10x1 plate minus a centred 6x6 hole, then a post on top
        let s = eval(
            "box plate 10 10 1\nbox hole 6 6 1\nmove hole 2 2 0\ncut frame plate hole\n\
             box post 1 1 5\nmove post 0 0 1\nunion all frame post",
        );
        assert_eq!(s.total_volume, 100.0 - 36.0 + 5.0);
        assert!(!s.approximate);
    }

    #[test]
    fn overflow_is_an_eval_error() {
        let p = parse("box a 1e200 1e200 1e200").unwrap();
        assert!(matches!(evaluate(&p), Err(EvalError::Overflow(_))));
    }

    #[test]
    fn canonicalize_idempotent_and_normalises() {
        let s = SceneDescriptor {
            primitives: vec![
                Primitive {
                    shape: Shape::Sphere,
                    params: vec![1.00049],
                    position: [-0.0001, 0.0, 0.0],
                    booleans: vec![],
                },
                Primitive {
                    shape: Shape::Box,
                    params: vec![1.0, 1.0, 1.0],
                    position: [0.0; 3],
                    booleans: vec![],
                },
            ],
            bbox: Aabb::EMPTY,
            total_volume: 5.0,
            approximate: false,
        };
        let c = s.canonicalize();
        assert_eq!(c.primitives[0].shape, Shape::Box);
        assert_eq!(c.primitives[1].params, vec![1.0]);
        assert_eq!(c.primitives[1].position, [0.0, 0.0, 0.0]);
        assert!(c.primitives[1].position[0].is_sign_positive());
        assert_eq!(c.canonicalize(), c);
    }
}
