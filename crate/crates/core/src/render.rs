//! Top-down orthographic SVG renderings of scenes.

use alloc::format;
use alloc::string::String;
use core::fmt::Write;

use crate::geometry::{Polygon2, Pose6D, Vec2};
use crate::twin::{TerrainKind, TwinScene};

const SCALE: f64 = 400.0;
const MARGIN: f64 = 20.0;

struct View {
    min: Vec2,
    max: Vec2,
}

impl View {
    /// Frames everything except the ground plane.
    fn of(scene: &TwinScene) -> Self {
        let mut min = Vec2::new(-0.1, -0.6);
        let mut max = Vec2::new(1.2, 0.6);
        let base = scene.robot.base();
        let pts = scene
            .terrain
            .iter()
            .filter(|t| !t.is_ground())
            .flat_map(|t| t.footprint.vertices().iter().copied())
            .chain(scene.objects.iter().map(|o| o.pose.xy()))
            .chain(core::iter::once(base));
        for p in pts {
            min = min.inf(&p);
            max = max.sup(&p);
        }
        Self { min, max }
    }

    fn size(&self) -> (f64, f64) {
        let d = self.max - self.min;
        (d.x * SCALE + 2.0 * MARGIN, d.y * SCALE + 2.0 * MARGIN)
    }

    // world +x is image right, world +y is image up
    fn px(&self, p: &Vec2) -> (f64, f64) {
        (MARGIN + (p.x - self.min.x) * SCALE, MARGIN + (self.max.y - p.y) * SCALE)
    }

    fn points(&self, poly: &Polygon2) -> String {
        let mut s = String::new();
        for (i, v) in poly.vertices().iter().enumerate() {
            let (x, y) = self.px(v);
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{x:.2},{y:.2}");
        }
        s
    }
}

fn terrain_fill(kind: &TerrainKind) -> &'static str {
    match kind {
        TerrainKind::Ground => "#f4f4f4",
        TerrainKind::TableSurface => "#d9c7a7",
        TerrainKind::Wall { .. } => "#6b6b6b",
        TerrainKind::Slope { .. } => "#b9d3a0",
        TerrainKind::Slot { .. } => "#8a7250",
        TerrainKind::Shelf { .. } => "#a7b8d9",
    }
}

fn scene_body(scene: &TwinScene, view: &View, out: &mut String, skip: Option<&str>) {
    for t in scene.terrain.iter().filter(|t| !t.is_ground()) {
        let _ = writeln!(
            out,
            "<polygon class=\"terrain {}\" points=\"{}\" fill=\"{}\" stroke=\"#444\" stroke-width=\"0.5\"/>",
            t.kind.label(),
            view.points(&t.footprint),
            terrain_fill(&t.kind)
        );
    }
    let (bx, by) = view.px(&scene.robot.base());
    let _ = writeln!(out, "<circle class=\"robot\" cx=\"{bx:.2}\" cy=\"{by:.2}\" r=\"6\" fill=\"#333\"/>");
    let r = scene.robot.reach_max * SCALE;
    let _ = writeln!(
        out,
        "<circle class=\"reach\" cx=\"{bx:.2}\" cy=\"{by:.2}\" r=\"{r:.2}\" fill=\"none\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>"
    );
    for o in scene.objects.iter().filter(|o| Some(o.id.as_str()) != skip) {
        let fill = if o.tool_spec.is_some() { "#c98a3d" } else { "#3d6fc9" };
        let _ = writeln!(
            out,
            "<polygon class=\"object\" data-id=\"{}\" points=\"{}\" fill=\"{fill}\" stroke=\"#111\"/>",
            o.id,
            view.points(&o.footprint())
        );
    }
}

fn open(view: &View) -> String {
    let (w, h) = view.size();
    format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.2} {h:.2}\">\n")
}

pub fn render_scene(scene: &TwinScene) -> String {
    let view = View::of(scene);
    let mut out = open(&view);
    scene_body(scene, &view, &mut out, None);
    out.push_str("</svg>\n");
    out
}

/// Scene with one object drawn translucent at its current pose and solid at
/// the candidate pose, tagged with the prompt index.
pub fn render_candidate(scene: &TwinScene, object_id: &str, candidate: &Pose6D, index: usize) -> String {
    let view = View::of(scene);
    let mut out = open(&view);
    scene_body(scene, &view, &mut out, Some(object_id));
    if let Ok(obj) = scene.object(object_id) {
        let _ = writeln!(
            out,
            "<polygon class=\"current\" points=\"{}\" fill=\"#3d6fc9\" fill-opacity=\"0.3\" stroke=\"#111\" stroke-opacity=\"0.3\"/>",
            view.points(&obj.footprint())
        );
        let cand = obj.obb().with_pose(*candidate);
        let _ = writeln!(
            out,
            "<polygon class=\"candidate\" points=\"{}\" fill=\"#d6453d\" stroke=\"#111\"/>",
            view.points(&cand.footprint())
        );
        let (x, y) = view.px(&candidate.xy());
        let _ = writeln!(
            out,
            "<text x=\"{x:.2}\" y=\"{y:.2}\" font-size=\"16\" text-anchor=\"middle\" fill=\"#fff\">{index}</text>"
        );
    }
    out.push_str("</svg>\n");
    out
}
