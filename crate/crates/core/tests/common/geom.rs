//! Generators for mock-dialect programs and scenes, and a voxel volume oracle.

use proptest::prelude::*;

use cadrefine::executor::{Command, Primitive, Program, Shape};
use cadrefine::SceneDescriptor;

#[derive(Debug, Clone)]
pub enum Op {
    Box([f64; 3]),
    Sphere(f64),
    Cylinder(f64, f64),
    Move(usize, [f64; 3]),
    Union(usize, usize),
    Cut(usize, usize),
}

fn positive() -> impl Strategy<Value = f64> {
    prop_oneof![
        3 => 0.001f64..500.0,
        1 => (1u32..200).prop_map(|v| v as f64 * 0.5),
        1 => prop::num::f64::POSITIVE | prop::num::f64::NORMAL,
    ]
}

fn offset() -> impl Strategy<Value = f64> {
    prop_oneof![
        -500.0f64..500.0,
        (-40i32..40).prop_map(|v| v as f64),
        Just(0.0)
    ]
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => [positive(), positive(), positive()].prop_map(Op::Box),
        2 => positive().prop_map(Op::Sphere),
        2 => (positive(), positive()).prop_map(|(r, h)| Op::Cylinder(r, h)),
        3 => (any::<usize>(), [offset(), offset(), offset()]).prop_map(|(i, d)| Op::Move(i, d)),
        1 => (any::<usize>(), any::<usize>()).prop_map(|(a, b)| Op::Union(a, b)),
        1 => (any::<usize>(), any::<usize>()).prop_map(|(a, b)| Op::Cut(a, b)),
    ]
}

/// Turns random ops into a program that respects scoping; ops that cannot
/// apply are skipped.
pub fn build(ops: &[Op]) -> Program {
    let mut live: Vec<String> = Vec::new();
    let mut commands = Vec::new();
    let mut fresh = 0;
    let mut name = || {
        fresh += 1;
        format!("s{fresh}")
    };
    for op in ops {
        let cmd = match op {
            Op::Box(size) => Command::Box {
                name: name(),
                size: *size,
            },
            Op::Sphere(r) => Command::Sphere {
                name: name(),
                radius: *r,
            },
            Op::Cylinder(r, h) => Command::Cylinder {
                name: name(),
                radius: *r,
                height: *h,
            },
            Op::Move(i, d) if !live.is_empty() => Command::Move {
                name: live[i % live.len()].clone(),
                offset: *d,
            },
            Op::Union(i, j) | Op::Cut(i, j) if live.len() >= 2 => {
                let a = live.remove(i % live.len());
                let b = live.remove(j % live.len());
                let n = name();
                if matches!(op, Op::Union(..)) {
                    Command::Union { name: n, a, b }
                } else {
                    Command::Cut { name: n, a, b }
                }
            }
            _ => continue,
        };
        if let Some(n) = cmd.defines() {
            live.push(n.to_string());
        }
        commands.push(cmd);
    }
    if commands.is_empty() {
        commands.push(Command::Sphere {
            name: "s0".into(),
            radius: 1.0,
        });
    }
    Program { commands }
}

pub fn program() -> impl Strategy<Value = Program> {
    prop::collection::vec(op(), 1..24).prop_map(|ops| build(&ops))
}

pub fn primitive() -> impl Strategy<Value = Primitive> {
    let shape = prop_oneof![Just(Shape::Box), Just(Shape::Sphere), Just(Shape::Cylinder)];
    (
        shape,
        [-100.0f64..100.0, -100.0f64..100.0, -100.0f64..100.0],
        [0.01f64..50.0, 0.01f64..50.0, 0.01f64..50.0],
    )
        .prop_map(|(shape, position, dims)| {
            let params = match shape {
                Shape::Box => dims.to_vec(),
                Shape::Sphere => vec![dims[0]],
                Shape::Cylinder => vec![dims[0], dims[1]],
            };
            Primitive {
                shape,
                params,
                position,
                booleans: Vec::new(),
            }
        })
}

pub fn raw_scene() -> impl Strategy<Value = SceneDescriptor> {
    (prop::collection::vec(primitive(), 0..8), 0.0f64..1e5).prop_map(|(primitives, v)| {
        SceneDescriptor {
            primitives,
            total_volume: v,
            ..SceneDescriptor::default()
        }
    })
}

/// Grid-point count of `a ∪ b` (or `a \ b`) for axis-aligned boxes, sampled at
/// cell centres with spacing `h`. Points along each x row are counted in closed form.
pub fn voxel_volume(a: ([f64; 3], [f64; 3]), b: ([f64; 3], [f64; 3]), cut: bool, h: f64) -> f64 {
    let lo = |i: usize| a.0[i].min(b.0[i]);
    let hi = |i: usize| a.1[i].max(b.1[i]);
    let inside = |bx: &([f64; 3], [f64; 3]), i: usize, v: f64| bx.0[i] <= v && v < bx.1[i];
    let n = |i: usize| ((hi(i) - lo(i)) / h).ceil() as i64;
    // centres lo + (k + 0.5) h lying in [p, q)
    let row = |p: f64, q: f64| -> i64 {
        let first = ((p - lo(0)) / h - 0.5).ceil().max(0.0) as i64;
        let end = (((q - lo(0)) / h - 0.5).ceil() as i64).min(n(0));
        (end - first).max(0)
    };
    let (ra, rb) = (row(a.0[0], a.1[0]), row(b.0[0], b.1[0]));
    let rab = row(a.0[0].max(b.0[0]), a.1[0].min(b.1[0]));
    let mut cells = 0i64;
    for iz in 0..n(2) {
        let z = lo(2) + (iz as f64 + 0.5) * h;
        for iy in 0..n(1) {
            let y = lo(1) + (iy as f64 + 0.5) * h;
            let in_a = inside(&a, 1, y) && inside(&a, 2, z);
            let in_b = inside(&b, 1, y) && inside(&b, 2, z);
            cells += match (in_a, in_b, cut) {
                (true, true, false) => ra + rb - rab,
                (true, true, true) => ra - rab,
                (true, false, _) => ra,
                (false, true, false) => rb,
                _ => 0,
            };
        }
    }
    cells as f64 * h * h * h
}
