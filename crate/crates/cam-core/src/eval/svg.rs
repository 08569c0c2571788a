//! Deterministic SVG rendering of insertion/deletion curves: one file per
//! (image, method, curve kind) with axes and the AUC annotated.

use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::report::CurveSet;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 440.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 320.0;

/// Result of an emission pass: files written plus curves skipped for having
/// fewer than two samples.
#[derive(Debug, Default)]
pub struct SvgEmission {
    pub written: Vec<PathBuf>,
    pub skipped: Vec<String>,
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| match c {
            '/' | '\\' | ':' | ' ' => '-',
            c => c,
        })
        .collect()
}

/// Renders one curve as standalone SVG text. Pure function of the curve.
pub fn render_curve_svg(cs: &CurveSet) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(
        s,
        "  <rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
    );
    let _ = writeln!(
        s,
        "  <text x=\"{LEFT}\" y=\"24\" font-family=\"monospace\" font-size=\"13\">{} {} {}</text>",
        cs.image_id,
        cs.method,
        cs.kind.as_str()
    );
    // Axes.
    let _ = writeln!(
        s,
        "  <line x1=\"{LEFT}\" y1=\"{BOTTOM}\" x2=\"{RIGHT}\" y2=\"{BOTTOM}\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        s,
        "  <line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{BOTTOM}\" stroke=\"black\"/>"
    );
    // Ticks at 0, 0.5, 1 on both axes.
    for i in 0..=2 {
        let f = i as f64 / 2.0;
        let x = LEFT + f * (RIGHT - LEFT);
        let y = BOTTOM - f * (BOTTOM - TOP);
        let _ = writeln!(
            s,
            "  <line x1=\"{x:.2}\" y1=\"{BOTTOM}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
            BOTTOM + 5.0
        );
        let _ = writeln!(
            s,
            "  <text x=\"{x:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"11\" \
             text-anchor=\"middle\">{f:.1}</text>",
            BOTTOM + 18.0
        );
        let _ = writeln!(
            s,
            "  <line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{LEFT}\" y2=\"{y:.2}\" stroke=\"black\"/>",
            LEFT - 5.0
        );
        let _ = writeln!(
            s,
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"11\" \
             text-anchor=\"end\">{f:.1}</text>",
            LEFT - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"11\" \
         text-anchor=\"middle\">fraction</text>",
        (LEFT + RIGHT) / 2.0,
        BOTTOM + 34.0
    );
    // Polyline.
    let mut points = String::new();
    for sample in &cs.curve.samples {
        let x = LEFT + sample.fraction * (RIGHT - LEFT);
        let y = BOTTOM - sample.confidence.clamp(0.0, 1.0) * (BOTTOM - TOP);
        let _ = write!(points, "{x:.2},{y:.2} ");
    }
    let _ = writeln!(
        s,
        "  <polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"{}\"/>",
        points.trim_end()
    );
    let _ = writeln!(
        s,
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"13\" \
         text-anchor=\"end\">AUC={:.4}</text>",
        RIGHT,
        TOP - 10.0,
        cs.curve.auc
    );
    s.push_str("</svg>\n");
    s
}

/// Writes one SVG per curve into `dir`; curves with fewer than two samples
/// are skipped and reported.
pub fn emit_curves_svg(curves: &[CurveSet], dir: &Path) -> Result<SvgEmission> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut emission = SvgEmission::default();
    for cs in curves {
        if cs.curve.samples.len() < 2 {
            emission.skipped.push(format!(
                "{} {} {}: degenerate curve with {} point(s)",
                cs.image_id,
                cs.method,
                cs.kind.as_str(),
                cs.curve.samples.len()
            ));
            continue;
        }
        let name = format!(
            "{}__{}__{}.svg",
            sanitize(&cs.image_id),
            sanitize(&cs.method.to_string()),
            cs.kind.as_str()
        );
        let path = dir.join(name);
        fs::write(&path, render_curve_svg(cs)).map_err(|e| Error::io(&path, e))?;
        emission.written.push(path);
    }
    Ok(emission)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cam::MethodId;
    use crate::eval::report::CurveKind;
    use crate::metrics::{Curve, CurveSample};

    fn curve_set(samples: Vec<(f64, f64)>, auc: f64) -> CurveSet {
        CurveSet {
            image_id: "img-0".into(),
            method: MethodId::GradCam,
            kind: CurveKind::Insertion,
            curve: Curve {
                samples: samples
                    .into_iter()
                    .map(|(fraction, confidence)| CurveSample {
                        fraction,
                        confidence,
                    })
                    .collect(),
                auc,
            },
        }
    }

    #[test]
    fn constant_curve_annotates_auc() {
        let cs = curve_set(vec![(0.0, 0.5), (0.5, 0.5), (1.0, 0.5)], 0.5);
        let svg = render_curve_svg(&cs);
        assert!(svg.contains("AUC=0.5000"));
        assert!(svg.contains("<polyline"));
        // Deterministic text.
        assert_eq!(svg, render_curve_svg(&cs));
    }

    #[test]
    fn two_point_triangle_curve() {
        let cs = curve_set(vec![(0.0, 1.0), (1.0, 0.0)], 0.5);
        let svg = render_curve_svg(&cs);
        assert!(svg.contains("AUC=0.5000"));
    }

    #[test]
    fn degenerate_curves_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let good = curve_set(vec![(0.0, 0.2), (1.0, 0.9)], 0.55);
        let bad = curve_set(vec![(0.0, 0.2)], 0.2);
        let emission = emit_curves_svg(&[good, bad], dir.path()).unwrap();
        assert_eq!(emission.written.len(), 1);
        assert_eq!(emission.skipped.len(), 1);
    }
}
