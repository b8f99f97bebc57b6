//! Seeded scene generators: cluttered tabletop, aperture in a wall, and a
//! two-tier shelf.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use airgrasp_core::scene::{CameraFile, ObjectFile, PartFile, PoseFile, SceneFile, ShapeFile, SpawnFile, SCENE_SCHEMA};
use airgrasp_core::scene::{CameraModel, Scene};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Tabletop,
    Window,
    Shelf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Density {
    Sparse,
    Dense,
}

/// Named (kind, density) pair as written in config files and on the
/// command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    TabletopSparse,
    TabletopDense,
    #[serde(alias = "window")]
    WindowSparse,
    WindowDense,
    #[serde(alias = "shelf")]
    ShelfSparse,
    ShelfDense,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 6] = [
        Self::TabletopSparse,
        Self::TabletopDense,
        Self::WindowSparse,
        Self::WindowDense,
        Self::ShelfSparse,
        Self::ShelfDense,
    ];

    pub fn kind(&self) -> ScenarioKind {
        match self {
            Self::TabletopSparse | Self::TabletopDense => ScenarioKind::Tabletop,
            Self::WindowSparse | Self::WindowDense => ScenarioKind::Window,
            Self::ShelfSparse | Self::ShelfDense => ScenarioKind::Shelf,
        }
    }

    pub fn density(&self) -> Density {
        match self {
            Self::TabletopSparse | Self::WindowSparse | Self::ShelfSparse => Density::Sparse,
            _ => Density::Dense,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::TabletopSparse => "tabletop_sparse",
            Self::TabletopDense => "tabletop_dense",
            Self::WindowSparse => "window_sparse",
            Self::WindowDense => "window_dense",
            Self::ShelfSparse => "shelf_sparse",
            Self::ShelfDense => "shelf_dense",
        }
    }

    pub fn spec(&self, seed: u64) -> ScenarioSpec {
        ScenarioSpec {
            kind: self.kind(),
            density: self.density(),
            seed,
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "window" => return Ok(Self::WindowSparse),
            "shelf" => return Ok(Self::ShelfSparse),
            _ => {}
        }
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown scenario '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub density: Density,
    pub seed: u64,
}

/// A generated scene plus the command that goes with it.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub file: SceneFile,
    pub scene: Scene,
    pub instruction: String,
}

pub const TABLE_TOP_Z: f64 = 0.75;
pub const APERTURE: [f64; 2] = [0.6, 0.5];
pub const SHELF_RECESS: f64 = 0.25;

const COLORS: [&str; 10] = [
    "blue", "yellow", "white", "black", "orange", "purple", "gray", "pink", "brown", "teal",
];
const NOUNS: [&str; 5] = ["can", "carton", "jar", "block", "tin"];
const TARGETS: [(&str, bool); 6] = [
    ("red box", false),
    ("green bottle", true),
    ("silver can", true),
    ("yellow sponge", false),
    ("red mug", true),
    ("blue cube", false),
];
const MAX_TRIES: usize = 400;

/// Footprint of an upright primitive: center, circumscribed radius.
#[derive(Clone, Copy)]
struct Footprint {
    x: f64,
    y: f64,
    r: f64,
}

impl Footprint {
    fn clear_of(&self, o: &Footprint, gap: f64) -> bool {
        ((self.x - o.x).powi(2) + (self.y - o.y).powi(2)).sqrt() >= self.r + o.r + gap
    }
}

struct Builder {
    rng: ChaCha8Rng,
    objects: Vec<ObjectFile>,
    labels: Vec<String>,
}

impl Builder {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            objects: Vec::new(),
            labels: Vec::new(),
        }
    }

    fn next_id(&self) -> u32 {
        self.objects.len() as u32 + 1
    }

    fn push(&mut self, o: ObjectFile) {
        self.labels.push(o.label.clone());
        self.objects.push(o);
    }

    fn floor(&mut self) {
        let id = self.next_id();
        self.push(boxed(id, "floor", [8.0, 8.0, 0.1], [0.0, 0.0, -0.05]));
    }

    /// Table top at `TABLE_TOP_Z` with four legs.
    fn table(&mut self, center: [f64; 2], size: [f64; 2]) {
        let id = self.next_id();
        let thick = 0.04;
        let mut t = boxed(id, "table", [size[0], size[1], thick], [center[0], center[1], TABLE_TOP_Z - 0.5 * thick]);
        t.context = true;
        let leg_h = TABLE_TOP_Z - thick;
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                t.parts.push(PartFile {
                    shape: ShapeFile::Box,
                    pose: PoseFile::at([
                        center[0] + sx * (0.5 * size[0] - 0.05),
                        center[1] + sy * (0.5 * size[1] - 0.05),
                        0.5 * leg_h,
                    ]),
                    dims: Some([0.05, 0.05, leg_h]),
                });
            }
        }
        self.push(t);
    }

    fn fresh_label(&mut self) -> String {
        loop {
            let l = format!(
                "{} {}",
                COLORS.choose(&mut self.rng).expect("non-empty"),
                NOUNS.choose(&mut self.rng).expect("non-empty")
            );
            if !self.labels.contains(&l) && !TARGETS.iter().any(|(t, _)| *t == l) {
                return l;
            }
        }
    }

    /// Upright box or octagonal prism standing on `z0`.
    fn upright(&mut self, label: String, cylinder: bool, width: f64, height: f64, at: [f64; 2], z0: f64) -> ObjectFile {
        let yaw = self.rng.gen_range(0.0..180.0);
        ObjectFile {
            id: self.next_id(),
            label,
            target: false,
            context: false,
            shape: if cylinder { ShapeFile::Prism { sides: 8 } } else { ShapeFile::Box },
            pose: PoseFile::with_yaw([at[0], at[1], z0 + 0.5 * height], yaw),
            dims: Some([width, width, height]),
            parts: Vec::new(),
        }
    }

    fn target(&mut self, at: [f64; 2], z0: f64) -> Footprint {
        let (label, cylinder) = *TARGETS.choose(&mut self.rng).expect("non-empty");
        let width = self.rng.gen_range(0.06..0.075);
        let height = self.rng.gen_range(0.10..0.16);
        let mut o = self.upright(label.to_string(), cylinder, width, height, at, z0);
        o.target = true;
        self.push(o);
        Footprint {
            x: at[0],
            y: at[1],
            r: circumradius(cylinder, width),
        }
    }

    /// Places a distractor whose footprint stays clear of `keep_clear` and
    /// inside `region` (`[xmin, xmax, ymin, ymax]`, footprint included).
    #[allow(clippy::too_many_arguments)]
    fn distractor(
        &mut self,
        region: [f64; 4],
        near: Option<(Footprint, f64, f64)>,
        heights: (f64, f64),
        z0: f64,
        keep_clear: &[Footprint],
    ) -> Result<()> {
        for _ in 0..MAX_TRIES {
            let cylinder = self.rng.gen_bool(0.5);
            let width = self.rng.gen_range(0.05..0.09);
            let height = self.rng.gen_range(heights.0..heights.1);
            let r = circumradius(cylinder, width);
            let (x, y) = match near {
                Some((c, dmin, dmax)) => {
                    let a = self.rng.gen_range(0.0..TAU);
                    let d = self.rng.gen_range(dmin..dmax);
                    (c.x + d * a.cos(), c.y + d * a.sin())
                }
                None => (
                    self.rng.gen_range(region[0]..region[1]),
                    self.rng.gen_range(region[2]..region[3]),
                ),
            };
            let fp = Footprint { x, y, r };
            let inside = x - r >= region[0] && x + r <= region[1] && y - r >= region[2] && y + r <= region[3];
            if inside && keep_clear.iter().all(|k| fp.clear_of(k, 0.005)) {
                let label = self.fresh_label();
                let o = self.upright(label, cylinder, width, height, [x, y], z0);
                self.push(o);
                return Ok(());
            }
        }
        Err(HarnessError::Generation("could not place a distractor".into()))
    }

    fn finish(self, spawn: SpawnFile) -> SceneFile {
        SceneFile {
            schema: SCENE_SCHEMA,
            gravity: [0.0, 0.0, -1.0],
            camera: CameraFile::from(&CameraModel::default()),
            spawn: Some(spawn),
            objects: self.objects,
            clutter: Vec::new(),
        }
    }
}

fn circumradius(cylinder: bool, width: f64) -> f64 {
    if cylinder {
        0.5 * width / (PI / 8.0).cos()
    } else {
        0.5 * width * 2f64.sqrt()
    }
}

fn boxed(id: u32, label: &str, dims: [f64; 3], center: [f64; 3]) -> ObjectFile {
    ObjectFile {
        id,
        label: label.into(),
        target: false,
        context: false,
        shape: ShapeFile::Box,
        pose: PoseFile::at(center),
        dims: Some(dims),
        parts: Vec::new(),
    }
}

fn part(dims: [f64; 3], center: [f64; 3]) -> PartFile {
    PartFile {
        shape: ShapeFile::Box,
        pose: PoseFile::at(center),
        dims: Some(dims),
    }
}

fn target_label(b: &Builder) -> String {
    b.objects.iter().find(|o| o.target).expect("target placed").label.clone()
}

fn tabletop(spec: &ScenarioSpec) -> Result<(SceneFile, String)> {
    let mut b = Builder::new(spec.seed);
    b.floor();
    let size = [1.2, 0.8];
    b.table([0.0, 0.0], size);
    let top = [-0.5 * size[0] + 0.02, 0.5 * size[0] - 0.02, -0.5 * size[1] + 0.02, 0.5 * size[1] - 0.02];
    let at = [b.rng.gen_range(-0.35..0.35), b.rng.gen_range(-0.2..0.2)];
    let t = b.target(at, TABLE_TOP_Z);
    match spec.density {
        Density::Sparse => {
            for _ in 0..4 {
                b.distractor(top, None, (0.06, 0.20), TABLE_TOP_Z, &[t])?;
            }
        }
        Density::Dense => {
            for _ in 0..6 {
                b.distractor(top, Some((t, 0.10, 0.22)), (0.16, 0.30), TABLE_TOP_Z, &[t])?;
            }
            for _ in 0..3 {
                b.distractor(top, None, (0.06, 0.25), TABLE_TOP_Z, &[t])?;
            }
        }
    }
    let theta = b.rng.gen_range(0.0..TAU);
    let spawn = SpawnFile {
        xyz: [2.3 * theta.cos(), 2.3 * theta.sin(), 1.5],
        yaw_deg: (theta + PI + b.rng.gen_range(-0.8..0.8)).to_degrees(),
    };
    let instruction = format!("grasp the {} from the table", target_label(&b));
    Ok((b.finish(spawn), instruction))
}

/// Wall plane `x = WALL_X` with a rectangular aperture; the target stands on
/// a table behind it.
pub const WALL_X: f64 = 0.6;

fn window(spec: &ScenarioSpec) -> Result<(SceneFile, String)> {
    let mut b = Builder::new(spec.seed);
    b.floor();
    let table_c = [1.3, 0.0];
    let size = [0.8, 0.8];
    b.table(table_c, size);
    let at = [b.rng.gen_range(1.05..1.25), b.rng.gen_range(-0.2..0.2)];
    let t = b.target(at, TABLE_TOP_Z);
    let region = [table_c[0] - 0.38, table_c[0] + 0.38, -0.38, 0.38];
    let n = if spec.density == Density::Sparse { 2 } else { 5 };
    for _ in 0..n {
        b.distractor(region, None, (0.06, 0.22), TABLE_TOP_Z, &[t])?;
    }

    let side = if b.rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let ya = side * b.rng.gen_range(0.5..0.6);
    let za = b.rng.gen_range(1.0..1.1);
    let [aw, ah] = APERTURE;
    let (thick, half_w, height) = (0.1, 2.0, 2.4);
    let (y0, y1, z0, z1) = (ya - 0.5 * aw, ya + 0.5 * aw, za - 0.5 * ah, za + 0.5 * ah);
    let id = b.next_id();
    let mut wall = boxed(id, "wall", [thick, y0 + half_w, height], [WALL_X, 0.5 * (y0 - half_w), 0.5 * height]);
    wall.parts = vec![
        part([thick, half_w - y1, height], [WALL_X, 0.5 * (y1 + half_w), 0.5 * height]),
        part([thick, aw, z0], [WALL_X, ya, 0.5 * z0]),
        part([thick, aw, height - z1], [WALL_X, ya, 0.5 * (z1 + height)]),
    ];
    b.push(wall);

    let spawn = SpawnFile {
        xyz: [-1.8, b.rng.gen_range(-0.15..0.15), 1.5],
        yaw_deg: b.rng.gen_range(-30.0..30.0),
    };
    let instruction = format!("pick the {} from the table", target_label(&b));
    Ok((b.finish(spawn), instruction))
}

pub const SHELF_FRONT_X: f64 = 0.0;
pub const SHELF_TIERS: [f64; 2] = [0.45, 0.85];

fn shelf(spec: &ScenarioSpec) -> Result<(SceneFile, String)> {
    let mut b = Builder::new(spec.seed);
    b.floor();
    let (depth, width, board, top) = (0.45, 1.0, 0.03, 1.25);
    let x0 = SHELF_FRONT_X;
    let xc = x0 + 0.5 * depth;
    let id = b.next_id();
    let mut s = boxed(id, "shelf", [depth, width, board], [xc, 0.0, SHELF_TIERS[0] - 0.5 * board]);
    s.context = true;
    s.parts = vec![
        part([depth, width, board], [xc, 0.0, SHELF_TIERS[1] - 0.5 * board]),
        part([depth, 0.03, top], [xc, -0.5 * width - 0.015, 0.5 * top]),
        part([depth, 0.03, top], [xc, 0.5 * width + 0.015, 0.5 * top]),
    ];
    b.push(s);
    let at = [x0 + SHELF_RECESS, b.rng.gen_range(-0.3..0.3)];
    let t = b.target(at, SHELF_TIERS[0]);
    let lower = [x0 + 0.02, x0 + depth - 0.02, -0.5 * width + 0.02, 0.5 * width - 0.02];
    let (n_low, n_high) = if spec.density == Density::Sparse { (1, 2) } else { (3, 4) };
    for _ in 0..n_low {
        b.distractor(lower, None, (0.06, 0.25), SHELF_TIERS[0], &[t])?;
    }
    for _ in 0..n_high {
        b.distractor(lower, None, (0.06, 0.3), SHELF_TIERS[1], &[])?;
    }
    let spawn = SpawnFile {
        xyz: [-2.0, b.rng.gen_range(-0.5..0.5), 1.3],
        yaw_deg: b.rng.gen_range(-40.0..40.0),
    };
    let instruction = format!("pick the {} from the shelf", target_label(&b));
    Ok((b.finish(spawn), instruction))
}

/// Generates the scene for `spec`; `camera_resolution` overrides the
/// default image size.
pub fn build_scenario(spec: &ScenarioSpec, camera_resolution: Option<[u32; 2]>) -> Result<Scenario> {
    let (mut file, instruction) = match spec.kind {
        ScenarioKind::Tabletop => tabletop(spec)?,
        ScenarioKind::Window => window(spec)?,
        ScenarioKind::Shelf => shelf(spec)?,
    };
    if let Some([w, h]) = camera_resolution {
        file.camera.width = w;
        file.camera.height = h;
    }
    let scene = file.to_scene().map_err(|e| HarnessError::Generation(e.to_string()))?;
    Ok(Scenario {
        spec: *spec,
        file,
        scene,
        instruction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    #[test]
    fn names_parse() {
        for n in ScenarioName::ALL {
            assert_eq!(n.as_str().parse::<ScenarioName>().unwrap(), n);
        }
        assert_eq!("shelf".parse::<ScenarioName>().unwrap(), ScenarioName::ShelfSparse);
        assert!("moon".parse::<ScenarioName>().is_err());
    }

    #[test]
    fn tabletop_counts_and_determinism() {
        let a = build_scenario(&ScenarioName::TabletopSparse.spec(7), None).unwrap();
        let movable = |s: &Scenario| s.scene.objects.iter().filter(|o| o.label != "floor" && o.label != "table").count();
        assert_eq!(movable(&a), 5);
        let b = build_scenario(&ScenarioName::TabletopSparse.spec(7), None).unwrap();
        assert_eq!(a.file, b.file);
        let d = build_scenario(&ScenarioName::TabletopDense.spec(7), None).unwrap();
        assert_eq!(movable(&d), 10);
    }

    #[test]
    fn target_never_interpenetrates() {
        for name in ScenarioName::ALL {
            for seed in 0..20 {
                let s = build_scenario(&name.spec(seed), None).unwrap();
                let t = s.scene.target();
                for o in s.scene.objects.iter().filter(|o| !o.is_target && !o.is_context && o.label != "floor") {
                    for h in &o.hulls {
                        assert!(!t.hulls.iter().any(|th| th.intersects(h)), "{name} seed {seed}: {}", o.label);
                    }
                }
                assert!(s.instruction.contains(&t.label));
            }
        }
    }

    #[test]
    fn window_blocks_the_straight_line() {
        for seed in 0..20 {
            let s = build_scenario(&ScenarioName::WindowSparse.spec(seed), None).unwrap();
            let wall = s.scene.object_by_label("wall").unwrap();
            let a = s.scene.spawn.translation;
            let c = s.scene.target().centroid();
            assert!(wall.hulls.iter().any(|h| h.intersects_segment(&a, &c)), "seed {seed}");
        }
    }

    #[test]
    fn shelf_blocks_access_from_above() {
        for seed in 0..20 {
            let s = build_scenario(&ScenarioName::ShelfDense.spec(seed), None).unwrap();
            let shelf = s.scene.object_by_label("shelf").unwrap();
            let c = s.scene.target().centroid();
            let above = c + Vector3::new(0.0, 0.0, 2.0);
            assert!(shelf.hulls.iter().any(|h| h.intersects_segment(&c, &above)), "seed {seed}");
        }
    }

    #[test]
    fn resolution_override() {
        let s = build_scenario(&ScenarioName::TabletopSparse.spec(1), Some([80, 60])).unwrap();
        assert_eq!((s.scene.camera.width, s.scene.camera.height), (80, 60));
    }
}
