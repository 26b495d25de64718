//! Run configuration: a TOML file with a few sections, every key optional.
//!
//! ```toml
//! metric = "plane:trifocal-rot"   # any preset name
//! engine = "dual"                 # or "fd"
//! tol_scale = 1.0
//!
//! [construction]                  # replaces `metric`
//! seed = "trifocal"               # "trifocal", "circle:<r>" or an expression in y1, y2
//! rho1 = "u2"
//! rho2 = "-u1"
//!
//! [grid]                          # n × n square, or an explicit point list
//! center = [0.0, 0.0]
//! half_width = 0.5
//! n = 3
//! points = [[0.5, 0.5]]
//!
//! [trace]                         # indicatrix integration
//! [figures]                       # translation families
//! [curvature]
//! connection = "auto"             # "auto", "semi-symmetric" or "zero"
//! ```

use std::path::Path;
use std::sync::Arc;

use fsl_core::engine::Engine;
use fsl_core::figures::FigureOptions;
use fsl_core::indicatrix::TraceOptions;
use fsl_core::metric::{preset, MetricField};
use fsl_core::plane::{construction, metric_from_field, trifocal_seed, OneFormField, Seed, SeedIndicatrix};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub metric: Option<String>,
    pub construction: Option<ConstructionConfig>,
    pub engine: Option<String>,
    pub tol_scale: Option<f64>,
    pub grid: GridConfig,
    pub trace: TraceOptions,
    pub figures: FigureOptions,
    pub curvature: CurvatureConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructionConfig {
    #[serde(default = "custom")]
    pub id: String,
    pub seed: String,
    pub rho1: String,
    pub rho2: String,
}

fn custom() -> String {
    "custom".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub center: [f64; 2],
    pub half_width: f64,
    pub n: usize,
    pub points: Option<Vec<[f64; 2]>>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            center: [0.0, 0.0],
            half_width: 0.5,
            n: 3,
            points: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurvatureConfig {
    pub connection: String,
    pub step: f64,
}

impl Default for CurvatureConfig {
    fn default() -> Self {
        CurvatureConfig {
            connection: "auto".into(),
            step: fsl_core::curvature::FD_STEP,
        }
    }
}

/// A configuration problem, reported with exit code 3.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        RunConfig::parse(&text).map_err(|ConfigError(m)| ConfigError(format!("{}: {m}", path.display())))
    }

    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string().trim_end().to_string()))
    }
}

/// The metric together with its defining one-form, when it is a plane
/// construction.
pub struct ResolvedMetric {
    pub metric: Arc<dyn MetricField>,
    pub rho: Option<OneFormField>,
}

/// Everything a command needs, validated.
pub struct Resolved {
    pub metric: ResolvedMetric,
    pub engine: Engine,
    pub tol_scale: f64,
    pub points: Vec<[f64; 2]>,
    /// `(center, half_width, n)` when the grid is a regular square.
    pub square: Option<([f64; 2], f64, usize)>,
    pub config: RunConfig,
}

fn bad(key: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("invalid value for `{key}`: {msg}"))
}

fn resolve_metric(cfg: &RunConfig) -> Result<ResolvedMetric, ConfigError> {
    if let Some(c) = &cfg.construction {
        if cfg.metric.is_some() {
            return Err(ConfigError("`metric` and `[construction]` are mutually exclusive".into()));
        }
        let rho = OneFormField::parse(&c.rho1, &c.rho2).map_err(|e| bad("construction.rho1/rho2", e))?;
        let seed = match c.seed.trim() {
            "trifocal" => trifocal_seed(),
            s => {
                let seed = match s.strip_prefix("circle:") {
                    Some(r) => Seed::Circle {
                        radius: r.trim().parse().map_err(|_| bad("construction.seed", format!("bad radius `{r}`")))?,
                    },
                    None => Seed::Expr(fsl_core::expr::Expr::parse(s).map_err(|e| bad("construction.seed", e))?),
                };
                SeedIndicatrix::new(seed).map_err(|e| bad("construction.seed", e))?
            }
        };
        let m = metric_from_field(&c.id, seed, &rho).map_err(|e| bad("construction", e))?;
        return Ok(ResolvedMetric {
            metric: Arc::new(m),
            rho: Some(rho),
        });
    }
    let spec = cfg.metric.as_deref().unwrap_or("plane:trifocal-rot");
    if let Some(id) = spec.trim().strip_prefix("plane:") {
        let m = construction(id.trim()).map_err(|e| bad("metric", e))?;
        let rho = m.field().rho().clone();
        return Ok(ResolvedMetric {
            metric: Arc::new(m),
            rho: Some(rho),
        });
    }
    Ok(ResolvedMetric {
        metric: preset(spec).map_err(|e| bad("metric", e))?,
        rho: None,
    })
}

pub fn parse_engine(name: &str) -> Result<Engine, ConfigError> {
    match name.trim() {
        "dual" => Ok(Engine::Dual),
        "fd" => Ok(Engine::fd()),
        other => Err(bad("engine", format!("`{other}` (expected `dual` or `fd`)"))),
    }
}

impl Resolved {
    /// Merge command-line overrides into the file configuration and check it.
    pub fn new(cfg: RunConfig, engine: Option<&str>, tol_scale: Option<f64>) -> Result<Resolved, ConfigError> {
        let metric = resolve_metric(&cfg)?;
        let engine = parse_engine(engine.or(cfg.engine.as_deref()).unwrap_or("dual"))?;
        let tol_scale = tol_scale.or(cfg.tol_scale).unwrap_or(1.0);
        if !(tol_scale > 0.0 && tol_scale.is_finite()) {
            return Err(bad("tol_scale", tol_scale));
        }
        let g = &cfg.grid;
        let (points, square) = match &g.points {
            Some(p) if p.is_empty() => return Err(bad("grid.points", "empty point list")),
            Some(p) => (p.clone(), None),
            None => {
                if g.n == 0 {
                    return Err(bad("grid.n", "the grid must be nonempty"));
                }
                if !(g.half_width >= 0.0 && g.half_width.is_finite()) {
                    return Err(bad("grid.half_width", g.half_width));
                }
                (
                    fsl_core::curvature::square_grid(g.center, g.half_width, g.n),
                    Some((g.center, g.half_width, g.n)),
                )
            }
        };
        if points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(bad("grid", "non-finite coordinate"));
        }
        if !["auto", "semi-symmetric", "zero"].contains(&cfg.curvature.connection.as_str()) {
            return Err(bad("curvature.connection", format!("`{}`", cfg.curvature.connection)));
        }
        if !(cfg.curvature.step > 0.0) {
            return Err(bad("curvature.step", cfg.curvature.step));
        }
        if cfg.trace.samples < 4 || !cfg.trace.samples.is_multiple_of(2) {
            return Err(bad("trace.samples", "must be even and at least 4"));
        }
        Ok(Resolved {
            metric,
            engine,
            tol_scale,
            points,
            square,
            config: cfg,
        })
    }
}
