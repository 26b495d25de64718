//! Translated trifocal ellipses along the radial line and the unit circle
//! through `(0, 1)`, written as SVG plus one combined CSV.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::norm2;
use crate::plane::{axis_path, transport, transport_along, trifocal_seed, Curve, OneFormField, Potential};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FigureOptions {
    pub radial_t: Vec<f64>,
    pub circle_t: Vec<f64>,
    pub samples: usize,
    pub step: f64,
}

impl Default for FigureOptions {
    fn default() -> Self {
        FigureOptions {
            radial_t: vec![0.0, 0.8, FRAC_PI_2.sqrt()],
            circle_t: (0..8).map(|k| k as f64 * FRAC_PI_4).collect(),
            samples: 720,
            step: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Radial,
    Circle,
}

impl Family {
    pub fn curve(self) -> Curve {
        match self {
            Family::Radial => Curve::radial(),
            Family::Circle => Curve::circle([0.0, 1.0], 1.0),
        }
    }

    /// The focal vector as printed with the figures.
    pub fn printed_focus(self, t: f64) -> [f64; 2] {
        let a = match self {
            Family::Radial => t * t,
            Family::Circle => 1.0 + t.sin(),
        };
        [a.cos(), -a.sin()]
    }

    fn label(self) -> &'static str {
        match self {
            Family::Radial => "radial",
            Family::Circle => "circle",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FigureEntry {
    pub family: Family,
    pub t: f64,
    pub base_point: [f64; 2],
    /// Focal vector by Runge–Kutta transport along the family curve.
    pub focus_ode: [f64; 2],
    /// Focal vector from the potential (rotation by `−f(p)`).
    pub focus_closed: [f64; 2],
    pub focus_printed: [f64; 2],
    pub ode_error: f64,
    pub printed_error: f64,
    pub file: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct FigureReport {
    pub entries: Vec<FigureEntry>,
    pub max_ode_error: f64,
    pub max_printed_error: f64,
    pub csv: String,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    norm2([a[0] - b[0], a[1] - b[1]])
}

/// Focal vectors and boundary samples for one family, without touching
/// the file system.
pub fn family_entries(
    family: Family,
    ts: &[f64],
    field: &Potential,
    step: f64,
) -> Result<Vec<(FigureEntry, crate::plane::TranslatedIndicatrix)>> {
    let seed = trifocal_seed();
    let curve = family.curve();
    let start = curve.point(0.0);
    let x0 = transport_along(field, &axis_path([0.0, 0.0], start), [1.0, 0.0], step)?;
    let mut grid = vec![0.0];
    grid.extend(ts.iter().copied());
    let samples = transport(field, &curve, x0, &grid, step)?;
    Ok(samples[1..]
        .iter()
        .map(|s| {
            let tr = crate::plane::translated_indicatrix(&seed, field, s.point);
            let printed = family.printed_focus(s.t);
            let entry = FigureEntry {
                family,
                t: s.t,
                base_point: s.point,
                focus_ode: s.x,
                focus_closed: tr.focal_vector,
                focus_printed: printed,
                ode_error: dist(s.x, tr.focal_vector),
                printed_error: dist(tr.focal_vector, printed),
                file: String::new(),
            };
            (entry, tr)
        })
        .collect())
}

/// Fixed-precision SVG of one translated indicatrix with its foci, in a
/// viewBox of half-width 2.5 around the base point.
pub fn svg(base: [f64; 2], boundary: &[[f64; 2]], focus: [f64; 2], title: &str) -> String {
    let mut s = String::new();
    let (x0, y0) = (base[0] - 2.5, -base[1] - 2.5);
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{x0:.6} {y0:.6} 5 5\" width=\"500\" height=\"500\">"
    );
    let _ = writeln!(s, "<title>{title}</title>");
    let _ = writeln!(s, "<rect x=\"{x0:.6}\" y=\"{y0:.6}\" width=\"5\" height=\"5\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<path d=\"M {:.6} {:.6} H {:.6} M {:.6} {:.6} V {:.6}\" stroke=\"#bbbbbb\" stroke-width=\"0.01\"/>",
        x0,
        -base[1],
        x0 + 5.0,
        base[0],
        y0,
        y0 + 5.0
    );
    let mut d = String::new();
    for (k, q) in boundary.iter().enumerate() {
        let _ = write!(
            d,
            "{}{:.6} {:.6} ",
            if k == 0 { "M " } else { "L " },
            base[0] + q[0],
            -(base[1] + q[1])
        );
    }
    d.push('Z');
    let _ = writeln!(s, "<path d=\"{d}\" fill=\"none\" stroke=\"black\" stroke-width=\"0.02\"/>");
    for sign in [-1.0, 0.0, 1.0] {
        let _ = writeln!(
            s,
            "<circle cx=\"{:.6}\" cy=\"{:.6}\" r=\"0.04\" fill=\"#c0392b\"/>",
            base[0] + sign * focus[0],
            -(base[1] + sign * focus[1])
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Write one SVG per parameter value plus `figures.csv` to `dir`.
pub fn render_figures(dir: &Path, opts: &FigureOptions) -> Result<FigureReport> {
    std::fs::create_dir_all(dir)?;
    let field = crate::plane::potential(&OneFormField::rotational(), [0.0, 0.0])?;
    let mut entries = Vec::new();
    let mut csv = String::from("family,t,kind,x,y\n");
    for (family, ts) in [(Family::Radial, &opts.radial_t), (Family::Circle, &opts.circle_t)] {
        for (k, (mut e, tr)) in family_entries(family, ts, &field, opts.step)?.into_iter().enumerate() {
            let boundary = tr.boundary(opts.samples)?;
            let name = format!("{}_{k:02}.svg", family.label());
            let title = format!("{} t={:.6}", family.label(), e.t);
            let path: PathBuf = dir.join(&name);
            std::fs::write(&path, svg(e.base_point, &boundary, e.focus_closed, &title))?;
            for q in &boundary {
                let _ = writeln!(
                    csv,
                    "{},{:.9},boundary,{:.12},{:.12}",
                    family.label(),
                    e.t,
                    e.base_point[0] + q[0],
                    e.base_point[1] + q[1]
                );
            }
            for (kind, sign) in [("focus-", -1.0), ("focus0", 0.0), ("focus+", 1.0)] {
                let _ = writeln!(
                    csv,
                    "{},{:.9},{kind},{:.12},{:.12}",
                    family.label(),
                    e.t,
                    e.base_point[0] + sign * e.focus_closed[0],
                    e.base_point[1] + sign * e.focus_closed[1]
                );
            }
            e.file = name;
            entries.push(e);
        }
    }
    let csv_path = dir.join("figures.csv");
    std::fs::write(&csv_path, &csv)?;
    let max_ode_error = entries.iter().map(|e| e.ode_error).fold(0.0, f64::max);
    let max_printed_error = entries.iter().map(|e| e.printed_error).fold(0.0, f64::max);
    Ok(FigureReport {
        entries,
        max_ode_error,
        max_printed_error,
        csv: "figures.csv".into(),
    })
}
