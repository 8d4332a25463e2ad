//! Regenerates `data/dataset.jsonl` and `data/replay.json`.
//!
//! Each item pairs a query with a reference mock macro. The expected scene is
//! the evaluated reference macro; the replay script gives every item a fixed
//! LLM trajectory so `bench --execute` produces a mix of outcomes.
//!
//!     cargo run -p cadrefine-core --example gen_dataset -- data

use std::collections::BTreeMap;
use std::path::PathBuf;

use cadrefine::bench::{DatasetItem, Difficulty};
use cadrefine::executor::{mock_eval, mock_parse};
use cadrefine::llm::{ReplayEntry, ScriptBook};

#[derive(Clone, Copy)]
enum Path {
    Direct,
    ErrorFix,
    ModelFix,
    ModelFix2,
    Late,
    NonExec,
    Wrong,
}

use Difficulty::{Easy, Hard, Medium};
use Path::*;

const ITEMS: &[(&str, Difficulty, Path, &str, &str)] = &[
    ("e01", Easy, Direct, "A CAD design of a cube with a side length of 10mm.", "box c 10 10 10"),
    ("e02", Easy, Direct, "A sphere with a radius of 8mm.", "sphere s 8"),
    ("e03", Easy, Direct, "A cylinder with a radius of 5mm and a height of 20mm.", "cylinder c 5 20"),
    ("e04", Easy, Direct, "A rectangular block measuring 20mm by 10mm by 5mm.", "box b 20 10 5"),
    ("e05", Easy, ErrorFix, "A sphere with a diameter of 30mm.", "sphere s 15"),
    ("e06", Easy, Direct, "A cube with 25mm sides.", "box c 25 25 25"),
    ("e07", Easy, Direct, "A cylinder 12mm in diameter and 40mm tall.", "cylinder c 6 40"),
    ("e08", Easy, Direct, "A flat plate 100mm long, 50mm wide and 2mm thick.", "box p 100 50 2"),
    ("e09", Easy, Direct, "A disk with a radius of 30mm and a thickness of 3mm.", "cylinder d 30 3"),
    ("e10", Easy, ModelFix, "A thin rod with a radius of 2mm and a length of 100mm.", "cylinder r 2 100"),
    ("e11", Easy, Direct, "A small cube with a side length of 5mm.", "box c 5 5 5"),
    ("e12", Easy, Direct, "A sphere with a radius of 1mm.", "sphere s 1"),
    ("e13", Easy, Direct, "A square pillar 10mm by 10mm and 60mm tall.", "box p 10 10 60"),
    ("e14", Easy, Direct, "A cylinder whose radius and height are both 15mm.", "cylinder c 15 15"),
    ("e15", Easy, NonExec, "A large sphere with a radius of 50mm.", "sphere s 50"),
    ("e16", Easy, Direct, "A box 40mm long, 30mm wide and 20mm high.", "box b 40 30 20"),
    ("e17", Easy, Direct, "A sheet 200mm by 100mm with a thickness of 1mm.", "box s 200 100 1"),
    ("e18", Easy, ErrorFix, "A coin with a radius of 12mm and a thickness of 2mm.", "cylinder c 12 2"),
    ("e19", Easy, Direct, "A cube with a side length of 100mm.", "box c 100 100 100"),
    ("e20", Easy, Direct, "A sphere with a radius of 2.5mm.", "sphere s 2.5"),
    ("e21", Easy, Direct, "A cylinder with a radius of 25mm and a height of 5mm.", "cylinder c 25 5"),
    ("m01", Medium, Direct, "A cube with a side length of 10mm positioned atop a sphere with an 8mm radius.",
        "sphere s 8\nbox c 10 10 10\nmove c -5 -5 8"),
    ("m02", Medium, Direct, "A cylinder of radius 5mm and height 10mm standing on the centre of a 20mm cube.",
        "box b 20 20 20\ncylinder c 5 10\nmove c 10 10 20"),
    ("m03", Medium, Direct, "Two 10mm cubes placed side by side along the x axis, touching.",
        "box a 10 10 10\nbox b 10 10 10\nmove b 10 0 0"),
    ("m04", Medium, ErrorFix, "A 20mm cube with a 5mm radius cylindrical hole through its centre from top to bottom.",
        "box b 20 20 20\ncylinder h 5 20\nmove h 10 10 0\ncut p b h"),
    ("m05", Medium, Direct, "A sphere of radius 10mm resting on top of a cylinder of radius 10mm and height 30mm.",
        "cylinder c 10 30\nsphere s 10\nmove s 0 0 40"),
    ("m06", Medium, ModelFix, "A 50mm square plate 5mm thick with a 10mm radius hole in the middle.",
        "box p 50 50 5\ncylinder h 10 5\nmove h 25 25 0\ncut r p h"),
    ("m07", Medium, Direct, "A stack of three 10mm cubes.",
        "box a 10 10 10\nbox b 10 10 10\nmove b 0 0 10\nbox c 10 10 10\nmove c 0 0 20"),
    ("m08", Medium, Wrong, "A cylinder of radius 10mm and height 20mm with a 5mm sphere sitting on the centre of its top face.",
        "cylinder c 10 20\nsphere s 5\nmove s 0 0 25"),
    ("m09", Medium, Direct, "An L-shaped block made of a 30x10x10mm bar joined to a 10x10x30mm upright at one end.",
        "box a 30 10 10\nbox b 10 10 30\nunion l a b"),
    ("m10", Medium, ErrorFix, "A 20mm cube with a 10mm cube removed from one corner.",
        "box a 20 20 20\nbox b 10 10 10\nmove b 10 10 10\ncut c a b"),
    ("m11", Medium, Direct, "Two spheres of radius 5mm whose centres are 20mm apart.",
        "sphere a 5\nsphere b 5\nmove b 20 0 0"),
    ("m12", Medium, ModelFix2, "A small table: a 60x40x2mm top on a single central leg of radius 3mm and height 30mm.",
        "cylinder leg 3 30\nbox top 60 40 2\nmove top -30 -20 30"),
    ("m13", Medium, NonExec, "A tube 30mm long with an outer radius of 10mm and an inner radius of 8mm.",
        "cylinder o 10 30\ncylinder i 8 30\ncut t o i"),
    ("m14", Medium, Direct, "A 10mm cube centred inside a sphere of radius 10mm, fused together.",
        "sphere s 10\nbox c 10 10 10\nmove c -5 -5 -5\nunion u s c"),
    ("m15", Medium, Direct, "A two-step block: a 20x20x10mm base with a 20x10x10mm step on top along one edge.",
        "box a 20 20 10\nbox b 20 10 10\nmove b 0 0 10"),
    ("m16", Medium, ModelFix, "A post of radius 4mm and height 40mm on the centre of a 20x20x4mm square base.",
        "box base 20 20 4\ncylinder p 4 40\nmove p 10 10 4"),
    ("m17", Medium, Wrong, "A dumbbell: two 8mm radius spheres joined by a 2mm radius bar 40mm long.",
        "cylinder bar 2 40\nsphere a 8\nsphere b 8\nmove b 0 0 40"),
    ("m18", Medium, Direct, "A 30mm cube with a spherical cavity of radius 10mm at its centre.",
        "box b 30 30 30\nsphere s 10\nmove s 15 15 15\ncut c b s"),
    ("m19", Medium, NonExec, "A 40x20x10mm block with two 3mm radius through holes, 20mm apart.",
        "box b 40 20 10\ncylinder h1 3 10\nmove h1 10 10 0\ncylinder h2 3 10\nmove h2 30 10 0\ncut c1 b h1\ncut c2 c1 h2"),
    ("m20", Medium, ModelFix, "A snowman made of a 10mm radius sphere with a 6mm radius sphere on top.",
        "sphere a 10\nsphere b 6\nmove b 0 0 16"),
    ("h01", Hard, Direct, "A CAD design of a basketball hoop.",
        "box base 60 60 5\ncylinder pole 5 300\nmove pole 30 30 5\nbox board 180 5 105\nmove board -60 35 250\ncylinder rim 23 2\nmove rim 30 80 260\ncylinder inner 22 2\nmove inner 30 80 260\ncut ring rim inner"),
    ("h02", Hard, Direct, "A table with a 100x60x4mm top on four cylindrical legs of radius 3mm and height 70mm.",
        "box top 100 60 4\nmove top 0 0 70\ncylinder l1 3 70\nmove l1 5 5 0\ncylinder l2 3 70\nmove l2 95 5 0\ncylinder l3 3 70\nmove l3 5 55 0\ncylinder l4 3 70\nmove l4 95 55 0"),
    ("h03", Hard, ModelFix2, "A chair with a 40x40x4mm seat 45mm above the ground, four square legs and a backrest.",
        "box seat 40 40 4\nmove seat 0 0 45\nbox l1 4 4 45\nbox l2 4 4 45\nmove l2 36 0 0\nbox l3 4 4 45\nmove l3 0 36 0\nbox l4 4 4 45\nmove l4 36 36 0\nbox back 40 4 40\nmove back 0 36 49"),
    ("h04", Hard, Wrong, "A bookshelf with two 100mm tall sides and three shelves.",
        "box left 2 30 100\nbox right 2 30 100\nmove right 78 0 0\nbox s1 76 30 2\nmove s1 2 0 0\nbox s2 76 30 2\nmove s2 2 0 49\nbox s3 76 30 2\nmove s3 2 0 98"),
    ("h05", Hard, ErrorFix, "A snowman of three stacked spheres wearing a cylindrical hat.",
        "sphere body 20\nsphere chest 14\nmove chest 0 0 34\nsphere head 9\nmove head 0 0 57\ncylinder hat 8 10\nmove hat 0 0 65"),
    ("h06", Hard, ModelFix, "A stepped shaft with three coaxial sections of radius 10, 7 and 4mm and lengths 30, 20 and 15mm.",
        "cylinder a 10 30\ncylinder b 7 20\nmove b 0 0 30\ncylinder c 4 15\nmove c 0 0 50"),
    ("h07", Hard, NonExec, "A round flange of radius 40mm and thickness 8mm with a 10mm centre bore and four bolt holes.",
        "cylinder disk 40 8\ncylinder bore 10 8\ncut f1 disk bore\ncylinder b1 3 8\nmove b1 28 0 0\ncut f2 f1 b1\ncylinder b2 3 8\nmove b2 -28 0 0\ncut f3 f2 b2\ncylinder b3 3 8\nmove b3 0 28 0\ncut f4 f3 b3\ncylinder b4 3 8\nmove b4 0 -28 0\ncut f5 f4 b4"),
    ("h08", Hard, Direct, "A simple house with a box body, a flat overhanging roof and a door opening.",
        "box body 60 40 30\nbox door 10 2 20\nmove door 25 -1 0\ncut house body door\nbox roof 64 44 4\nmove roof -2 -2 30"),
    ("h09", Hard, Late, "A barbell: a 100mm bar of radius 2mm with two 15mm radius weight plates near the ends.",
        "cylinder bar 2 100\ncylinder p1 15 5\nmove p1 0 0 10\ncylinder p2 15 5\nmove p2 0 0 85"),
    ("h10", Hard, Wrong, "A toy robot with a box body, a spherical head and two cylindrical arms.",
        "box body 20 10 30\nsphere head 6\nmove head 10 5 36\ncylinder arm1 2 20\nmove arm1 -3 5 5\ncylinder arm2 2 20\nmove arm2 23 5 5"),
    ("h11", Hard, Direct, "A tower of four centred cubes of side 40, 30, 20 and 10mm stacked from largest to smallest.",
        "box a 40 40 40\nbox b 30 30 30\nmove b 5 5 40\nbox c 20 20 20\nmove c 10 10 70\nbox d 10 10 10\nmove d 15 15 90"),
    ("h12", Hard, NonExec, "A wheel: a disk of radius 30mm and width 10mm on a hub of radius 8mm and length 20mm.",
        "cylinder disk 30 10\nmove disk 0 0 5\ncylinder hub 8 20"),
    ("h13", Hard, ErrorFix, "A desk lamp with a round base, a thin vertical pole and a spherical shade.",
        "cylinder base 15 3\ncylinder pole 1.5 50\nmove pole 0 0 3\nsphere shade 10\nmove shade 0 0 60"),
    ("h14", Hard, Wrong, "A castle tower of radius 20mm and height 60mm with four battlements on top.",
        "cylinder tower 20 60\nbox c1 8 8 8\nmove c1 -4 12 60\nbox c2 8 8 8\nmove c2 -4 -20 60\nbox c3 8 8 8\nmove c3 12 -4 60\nbox c4 8 8 8\nmove c4 -20 -4 60"),
    ("h15", Hard, ModelFix, "A mug with a 40mm outer radius, 90mm height, 4mm walls and a side handle.",
        "cylinder outer 40 90\ncylinder inner 36 86\nmove inner 0 0 4\ncut cup outer inner\nbox handle 10 20 50\nmove handle 40 -10 20"),
    ("h16", Hard, Direct, "A park bench with a 120x40x5mm seat 40mm high on two solid side supports.",
        "box seat 120 40 5\nmove seat 0 0 40\nbox s1 5 40 40\nbox s2 5 40 40\nmove s2 115 0 0"),
];

fn plan(reference: &str) -> String {
    let mut steps = Vec::new();
    for (i, line) in reference.lines().enumerate() {
        let t: Vec<&str> = line.split_whitespace().collect();
        let step = match t[0] {
            "box" => format!(
                "Create a box '{}' of {} x {} x {} mm.",
                t[1], t[2], t[3], t[4]
            ),
            "sphere" => format!("Create a sphere '{}' of radius {} mm.", t[1], t[2]),
            "cylinder" => format!(
                "Create a cylinder '{}' of radius {} mm and height {} mm.",
                t[1], t[2], t[3]
            ),
            "move" => format!("Move '{}' by ({}, {}, {}) mm.", t[1], t[2], t[3], t[4]),
            "union" => format!("Fuse '{}' and '{}' into '{}'.", t[2], t[3], t[1]),
            "cut" => format!("Cut '{}' from '{}' giving '{}'.", t[3], t[2], t[1]),
            other => panic!("unknown command {other}"),
        };
        steps.push(format!("{}. {step}", i + 1));
    }
    steps.join("\n")
}

fn response(plan: &str, text: &str) -> ReplayEntry {
    ReplayEntry::Response(format!("{plan}\n\n```\n{text}\n```"))
}

/// Misspells the first keyword.
fn broken(reference: &str) -> String {
    let (first, rest) = reference.split_once(' ').unwrap();
    let bad = match first {
        "box" => "cube",
        "sphere" => "ball",
        "cylinder" => "cyl",
        other => panic!("reference starts with {other}"),
    };
    format!("{bad} {rest}")
}

/// Executable but wrong: only the first primitive, at double size when the
/// reference has a single command.
fn wrong(reference: &str) -> String {
    let first = reference.lines().next().unwrap();
    if reference.lines().count() > 1 {
        return first.to_string();
    }
    let mut t: Vec<String> = first.split_whitespace().map(str::to_string).collect();
    let v: f64 = t[2].parse().unwrap();
    t[2] = format!("{}", v * 2.0);
    t.join(" ")
}

fn main() {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    std::fs::create_dir_all(&out).unwrap();

    let mut lines = String::new();
    let mut scripts = BTreeMap::new();
    for &(id, difficulty, path, query, reference) in ITEMS {
        let program = mock_parse(reference).unwrap_or_else(|e| panic!("{id}: {e}"));
        let scene = mock_eval(&program).unwrap_or_else(|e| panic!("{id}: {e}"));
        let item = DatasetItem {
            id: id.into(),
            query: query.into(),
            difficulty,
            expected_scene: Some(scene),
        };
        lines.push_str(&serde_json::to_string(&item).unwrap());
        lines.push('\n');

        let p = plan(reference);
        let good = response(&p, reference);
        let bad = response(&p, &broken(reference));
        let off = response(&plan(&wrong(reference)), &wrong(reference));
        // default budgets: 3 error refinements per macro, 3 model refinements
        let entries = match path {
            Direct => vec![good],
            ErrorFix => vec![bad, good],
            ModelFix => vec![off, good],
            ModelFix2 => vec![off.clone(), off, good],
            Late => vec![off.clone(), off.clone(), off, good],
            NonExec => vec![bad; 16],
            Wrong => vec![off; 4],
        };
        scripts.insert(id.to_string(), entries);
    }
    std::fs::write(out.join("dataset.jsonl"), lines).unwrap();
    let book = ScriptBook { scripts };
    std::fs::write(
        out.join("replay.json"),
        serde_json::to_string_pretty(&book).unwrap() + "\n",
    )
    .unwrap();
    eprintln!("wrote {} items to {}", ITEMS.len(), out.display());
}
