//! Experiment configuration: a line-based `key = value` format with
//! `[section]` headers and `#` comments, chosen to keep experiment files
//! diff-friendly. `parse_config` and `serialize_config` round-trip.

use std::path::Path;

use crate::fvm::{
    sigma_from_perms, Coefficient, MaterialParams, SourceRegion, SourceTarget, SourceTerm,
};
use crate::geometry::{FractureMode, Rect};
use crate::nlmc::{MassMode, RhsMode};
use crate::sim::TimeSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub model: FractureMode,
    pub domain: Rect,
    /// Fine structured-mesh resolution (nx, ny).
    pub fine: (usize, usize),
    /// Coarse grid resolution (nx, ny).
    pub coarse: (usize, usize),
    pub n_fractures: usize,
    pub min_length: f64,
    pub max_length: f64,
    pub seed: u64,
    /// Read this mesh file instead of generating one.
    pub mesh_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SigmaConfig {
    /// σ per network from the permeabilities: 2/(k_m⁻¹ + k_f⁻¹).
    Auto,
    /// Explicit values, broadcast over networks when a single entry.
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamsConfig {
    pub k_m: f64,
    /// Per-cell permeability field file (one value per fine cell).
    pub k_m_file: Option<String>,
    /// Fracture permeability per network (single entry broadcasts).
    pub k_f: Vec<f64>,
    pub c_m: f64,
    pub c_f: f64,
    pub mu: f64,
    /// Fracture aperture entering b_f = thickness·k_f/μ.
    pub thickness: f64,
    pub sigma: SigmaConfig,
    /// Multiplier on the transfer coefficient (dimensional-scaling knob).
    pub sigma_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpscaleConfig {
    pub layers: Vec<usize>,
    pub mass: MassMode,
    pub rhs: RhsMode,
    pub parallel: bool,
    pub dump_basis: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourcesConfig {
    pub terms: Vec<SourceTerm>,
    /// Rescale production so ΣF = 0 after application.
    pub balance: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: String,
    /// Step indices to snapshot in reports/VTK output.
    pub snapshots: Vec<usize>,
    pub vtk: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    pub params: ParamsConfig,
    pub time: TimeSpec,
    pub upscale: UpscaleConfig,
    pub sources: SourcesConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            geometry: GeometryConfig {
                model: FractureMode::Efm,
                domain: Rect::UNIT,
                fine: (80, 80),
                coarse: (20, 20),
                n_fractures: 30,
                min_length: 0.05,
                max_length: 0.3,
                seed: 1,
                mesh_file: None,
            },
            params: ParamsConfig {
                k_m: 1e-6,
                k_m_file: None,
                k_f: vec![1.0],
                c_m: 1e-2,
                c_f: 1e-3,
                mu: 1.0,
                thickness: 1.0,
                sigma: SigmaConfig::Auto,
                sigma_scale: 1.0,
            },
            time: TimeSpec {
                t_max: 0.1,
                n_steps: 20,
                p0: 1.0,
            },
            upscale: UpscaleConfig {
                layers: vec![1, 2, 3],
                mass: MassMode::Galerkin,
                rhs: RhsMode::Galerkin,
                parallel: false,
                dump_basis: false,
            },
            sources: SourcesConfig {
                terms: Vec::new(),
                balance: false,
            },
            output: OutputConfig {
                dir: "out".into(),
                snapshots: vec![5, 10, 15, 20],
                vtk: false,
            },
        }
    }
}

impl ExperimentConfig {
    /// Configuration-level consistency checks (file existence is checked at
    /// the point of use).
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        if g.domain.width() <= 0.0 || g.domain.height() <= 0.0 {
            return Err(Error::Config("degenerate domain rectangle".into()));
        }
        if g.fine.0 == 0 || g.fine.1 == 0 || g.coarse.0 == 0 || g.coarse.1 == 0 {
            return Err(Error::Config("mesh resolutions must be positive".into()));
        }
        if g.fine.0 % g.coarse.0 != 0 || g.fine.1 % g.coarse.1 != 0 {
            return Err(Error::Config(format!(
                "fine grid {}x{} is not a refinement of the coarse grid {}x{}",
                g.fine.0, g.fine.1, g.coarse.0, g.coarse.1
            )));
        }
        if self.upscale.layers.is_empty() {
            return Err(Error::Config("the oversampling layer list is empty".into()));
        }
        if self.upscale.layers.contains(&0) {
            return Err(Error::Config("oversampling layers must be ≥ 1".into()));
        }
        self.time.validate()?;
        for &snap in &self.output.snapshots {
            if snap > self.time.n_steps {
                return Err(Error::Config(format!(
                    "snapshot step {snap} exceeds n_steps = {}",
                    self.time.n_steps
                )));
            }
        }
        if !(self.params.sigma_scale >= 0.0) {
            return Err(Error::Config("sigma_scale must be nonnegative".into()));
        }
        Ok(())
    }
}

fn per_network(values: &[f64], n_networks: usize, name: &str) -> Result<Vec<f64>> {
    match values.len() {
        1 => Ok(vec![values[0]; n_networks.max(1)]),
        n if n == n_networks => Ok(values.to_vec()),
        n => Err(Error::Config(format!(
            "{name} has {n} entries but the geometry has {n_networks} networks"
        ))),
    }
}

impl ParamsConfig {
    /// Resolves the raw configuration into assembly coefficients.
    /// `k_m_field` is the loaded per-cell permeability when `k_m_file` is
    /// set; with a field, the auto-σ formula uses the mean permeability.
    pub fn material(
        &self,
        n_networks: usize,
        k_m_field: Option<Vec<f64>>,
    ) -> Result<MaterialParams> {
        if !(self.mu > 0.0) {
            return Err(Error::Config(format!("viscosity mu = {} is invalid", self.mu)));
        }
        if !(self.thickness > 0.0) {
            return Err(Error::Config(format!(
                "fracture thickness {} is invalid",
                self.thickness
            )));
        }
        let k_f = per_network(&self.k_f, n_networks, "k_f")?;
        let b_f: Vec<f64> = k_f.iter().map(|k| self.thickness * k / self.mu).collect();
        let (b_m, k_m_ref) = match k_m_field {
            Some(field) => {
                if field.is_empty() {
                    return Err(Error::Config("empty permeability field".into()));
                }
                let mean = field.iter().sum::<f64>() / field.len() as f64;
                let b: Vec<f64> = field.iter().map(|k| k / self.mu).collect();
                (Coefficient::PerEntity(b), mean)
            }
            None => (Coefficient::Uniform(self.k_m / self.mu), self.k_m),
        };
        let sigma: Vec<f64> = match &self.sigma {
            SigmaConfig::Auto => k_f
                .iter()
                .map(|&kf| sigma_from_perms(k_m_ref, kf).map(|s| s * self.sigma_scale))
                .collect::<Result<_>>()?,
            SigmaConfig::Values(v) => per_network(v, n_networks, "sigma")?
                .into_iter()
                .map(|s| s * self.sigma_scale)
                .collect(),
        };
        Ok(MaterialParams {
            a_m: self.c_m,
            a_f: self.c_f,
            b_m,
            b_f: Coefficient::PerEntity(b_f),
            sigma: Coefficient::PerEntity(sigma),
        })
    }
}

fn parse_f64(path: &str, line: usize, s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Parse {
        path: path.into(),
        line,
        msg: format!("expected a number, got `{s}`"),
    })
}

fn parse_usize(path: &str, line: usize, s: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::Parse {
        path: path.into(),
        line,
        msg: format!("expected a nonnegative integer, got `{s}`"),
    })
}

fn parse_bool(path: &str, line: usize, s: &str) -> Result<bool> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Parse {
            path: path.into(),
            line,
            msg: format!("expected true/false, got `{s}`"),
        }),
    }
}

fn parse_f64_list(path: &str, line: usize, s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| parse_f64(path, line, t.trim()))
        .collect()
}

fn parse_usize_list(path: &str, line: usize, s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| parse_usize(path, line, t.trim()))
        .collect()
}

fn parse_source(path: &str, line: usize, value: &str) -> Result<SourceTerm> {
    let err = |msg: String| Error::Parse {
        path: path.into(),
        line,
        msg,
    };
    let tokens: Vec<&str> = value.split_whitespace().collect();
    if tokens.len() < 4 {
        return Err(err(format!(
            "source needs `<matrix|fracture> <rect x0 y0 x1 y1 | cells i,j,...> <rate>`, got `{value}`"
        )));
    }
    let target = match tokens[0] {
        "matrix" => SourceTarget::Matrix,
        "fracture" => SourceTarget::Fracture,
        t => return Err(err(format!("unknown source target `{t}`"))),
    };
    let rate = parse_f64(path, line, tokens[tokens.len() - 1])?;
    let region = match tokens[1] {
        "rect" => {
            if tokens.len() != 7 {
                return Err(err("source rect needs 4 coordinates and a rate".into()));
            }
            let c: Vec<f64> = tokens[2..6]
                .iter()
                .map(|t| parse_f64(path, line, t))
                .collect::<Result<_>>()?;
            SourceRegion::Rect(Rect::new(c[0], c[1], c[2], c[3]))
        }
        "cells" => {
            if tokens.len() != 4 {
                return Err(err("source cells needs an index list and a rate".into()));
            }
            SourceRegion::Cells(parse_usize_list(path, line, tokens[2])?)
        }
        r => return Err(err(format!("unknown source region kind `{r}`"))),
    };
    Ok(SourceTerm {
        region,
        target,
        rate,
    })
}

/// Parses a configuration text. Unknown sections and keys are errors — a
/// typo silently falling back to a default would corrupt an experiment.
pub fn parse_config(text: &str, path: &str) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::default();
    let mut section = String::new();
    let mut seen_sources = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| Error::Parse {
                path: path.into(),
                line: line_no,
                msg: format!("malformed section header `{line}`"),
            })?;
            section = name.trim().to_string();
            if !matches!(
                section.as_str(),
                "geometry" | "params" | "time" | "upscale" | "sources" | "output"
            ) {
                return Err(Error::Parse {
                    path: path.into(),
                    line: line_no,
                    msg: format!("unknown section `[{section}]`"),
                });
            }
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.into(),
            line: line_no,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let unknown = || Error::Parse {
            path: path.into(),
            line: line_no,
            msg: format!("unknown key `{key}` in section `[{section}]`"),
        };
        match section.as_str() {
            "geometry" => match key {
                "model" => {
                    c.geometry.model = match value {
                        "dfm" => FractureMode::Dfm,
                        "efm" => FractureMode::Efm,
                        _ => {
                            return Err(Error::Parse {
                                path: path.into(),
                                line: line_no,
                                msg: format!("model must be dfm or efm, got `{value}`"),
                            })
                        }
                    }
                }
                "domain" => {
                    let v = value.split_whitespace().collect::<Vec<_>>();
                    if v.len() != 4 {
                        return Err(Error::Parse {
                            path: path.into(),
                            line: line_no,
                            msg: "domain needs `x0 y0 x1 y1`".into(),
                        });
                    }
                    c.geometry.domain = Rect::new(
                        parse_f64(path, line_no, v[0])?,
                        parse_f64(path, line_no, v[1])?,
                        parse_f64(path, line_no, v[2])?,
                        parse_f64(path, line_no, v[3])?,
                    );
                }
                "fine" | "coarse" => {
                    let v = value.split_whitespace().collect::<Vec<_>>();
                    if v.len() != 2 {
                        return Err(Error::Parse {
                            path: path.into(),
                            line: line_no,
                            msg: format!("{key} needs `nx ny`"),
                        });
                    }
                    let pair = (parse_usize(path, line_no, v[0])?, parse_usize(path, line_no, v[1])?);
                    if key == "fine" {
                        c.geometry.fine = pair;
                    } else {
                        c.geometry.coarse = pair;
                    }
                }
                "fractures" => c.geometry.n_fractures = parse_usize(path, line_no, value)?,
                "min_length" => c.geometry.min_length = parse_f64(path, line_no, value)?,
                "max_length" => c.geometry.max_length = parse_f64(path, line_no, value)?,
                "seed" => {
                    c.geometry.seed = value.parse().map_err(|_| Error::Parse {
                        path: path.into(),
                        line: line_no,
                        msg: format!("expected a seed integer, got `{value}`"),
                    })?
                }
                "mesh_file" => c.geometry.mesh_file = Some(value.to_string()),
                _ => return Err(unknown()),
            },
            "params" => match key {
                "k_m" => c.params.k_m = parse_f64(path, line_no, value)?,
                "k_m_file" => c.params.k_m_file = Some(value.to_string()),
                "k_f" => c.params.k_f = parse_f64_list(path, line_no, value)?,
                "c_m" => c.params.c_m = parse_f64(path, line_no, value)?,
                "c_f" => c.params.c_f = parse_f64(path, line_no, value)?,
                "mu" => c.params.mu = parse_f64(path, line_no, value)?,
                "thickness" => c.params.thickness = parse_f64(path, line_no, value)?,
                "sigma" => {
                    c.params.sigma = if value == "auto" {
                        SigmaConfig::Auto
                    } else {
                        SigmaConfig::Values(parse_f64_list(path, line_no, value)?)
                    }
                }
                "sigma_scale" => c.params.sigma_scale = parse_f64(path, line_no, value)?,
                _ => return Err(unknown()),
            },
            "time" => match key {
                "t_max" => c.time.t_max = parse_f64(path, line_no, value)?,
                "steps" => c.time.n_steps = parse_usize(path, line_no, value)?,
                "p0" => c.time.p0 = parse_f64(path, line_no, value)?,
                _ => return Err(unknown()),
            },
            "upscale" => match key {
                "layers" => c.upscale.layers = parse_usize_list(path, line_no, value)?,
                "mass" => {
                    c.upscale.mass = match value {
                        "galerkin" => MassMode::Galerkin,
                        "diagonal" => MassMode::Diagonal,
                        _ => {
                            return Err(Error::Parse {
                                path: path.into(),
                                line: line_no,
                                msg: format!("mass must be galerkin or diagonal, got `{value}`"),
                            })
                        }
                    }
                }
                "rhs" => {
                    c.upscale.rhs = match value {
                        "galerkin" => RhsMode::Galerkin,
                        "direct" => RhsMode::Direct,
                        _ => {
                            return Err(Error::Parse {
                                path: path.into(),
                                line: line_no,
                                msg: format!("rhs must be galerkin or direct, got `{value}`"),
                            })
                        }
                    }
                }
                "parallel" => c.upscale.parallel = parse_bool(path, line_no, value)?,
                "dump_basis" => c.upscale.dump_basis = parse_bool(path, line_no, value)?,
                _ => return Err(unknown()),
            },
            "sources" => match key {
                "source" => {
                    if !seen_sources {
                        // A config that lists sources overrides the default
                        // set instead of appending to it.
                        c.sources.terms.clear();
                        seen_sources = true;
                    }
                    c.sources.terms.push(parse_source(path, line_no, value)?);
                }
                "balance" => c.sources.balance = parse_bool(path, line_no, value)?,
                _ => return Err(unknown()),
            },
            "output" => match key {
                "dir" => c.output.dir = value.to_string(),
                "snapshots" => c.output.snapshots = parse_usize_list(path, line_no, value)?,
                "vtk" => c.output.vtk = parse_bool(path, line_no, value)?,
                _ => return Err(unknown()),
            },
            _ => {
                return Err(Error::Parse {
                    path: path.into(),
                    line: line_no,
                    msg: format!("key `{key}` before any section header"),
                })
            }
        }
    }
    Ok(c)
}

pub fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text, &path.display().to_string())
}

fn fmt_list<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn fmt_source(t: &SourceTerm) -> String {
    let target = match t.target {
        SourceTarget::Matrix => "matrix",
        SourceTarget::Fracture => "fracture",
    };
    match &t.region {
        SourceRegion::Rect(r) => {
            format!("{target} rect {} {} {} {} {}", r.x0, r.y0, r.x1, r.y1, t.rate)
        }
        SourceRegion::Cells(ix) => format!("{target} cells {} {}", fmt_list(ix), t.rate),
    }
}

/// Canonical text form; `parse_config(serialize_config(c)) == c`.
pub fn serialize_config(c: &ExperimentConfig) -> String {
    let mut s = String::new();
    let g = &c.geometry;
    s.push_str("[geometry]\n");
    s.push_str(&format!(
        "model = {}\n",
        match g.model {
            FractureMode::Dfm => "dfm",
            FractureMode::Efm => "efm",
        }
    ));
    s.push_str(&format!(
        "domain = {} {} {} {}\n",
        g.domain.x0, g.domain.y0, g.domain.x1, g.domain.y1
    ));
    s.push_str(&format!("fine = {} {}\n", g.fine.0, g.fine.1));
    s.push_str(&format!("coarse = {} {}\n", g.coarse.0, g.coarse.1));
    s.push_str(&format!("fractures = {}\n", g.n_fractures));
    s.push_str(&format!("min_length = {}\n", g.min_length));
    s.push_str(&format!("max_length = {}\n", g.max_length));
    s.push_str(&format!("seed = {}\n", g.seed));
    if let Some(f) = &g.mesh_file {
        s.push_str(&format!("mesh_file = {f}\n"));
    }
    let p = &c.params;
    s.push_str("\n[params]\n");
    s.push_str(&format!("k_m = {}\n", p.k_m));
    if let Some(f) = &p.k_m_file {
        s.push_str(&format!("k_m_file = {f}\n"));
    }
    s.push_str(&format!("k_f = {}\n", fmt_list(&p.k_f)));
    s.push_str(&format!("c_m = {}\n", p.c_m));
    s.push_str(&format!("c_f = {}\n", p.c_f));
    s.push_str(&format!("mu = {}\n", p.mu));
    s.push_str(&format!("thickness = {}\n", p.thickness));
    match &p.sigma {
        SigmaConfig::Auto => s.push_str("sigma = auto\n"),
        SigmaConfig::Values(v) => s.push_str(&format!("sigma = {}\n", fmt_list(v))),
    }
    s.push_str(&format!("sigma_scale = {}\n", p.sigma_scale));
    s.push_str("\n[time]\n");
    s.push_str(&format!("t_max = {}\n", c.time.t_max));
    s.push_str(&format!("steps = {}\n", c.time.n_steps));
    s.push_str(&format!("p0 = {}\n", c.time.p0));
    let u = &c.upscale;
    s.push_str("\n[upscale]\n");
    s.push_str(&format!("layers = {}\n", fmt_list(&u.layers)));
    s.push_str(&format!(
        "mass = {}\n",
        match u.mass {
            MassMode::Galerkin => "galerkin",
            MassMode::Diagonal => "diagonal",
        }
    ));
    s.push_str(&format!(
        "rhs = {}\n",
        match u.rhs {
            RhsMode::Galerkin => "galerkin",
            RhsMode::Direct => "direct",
        }
    ));
    s.push_str(&format!("parallel = {}\n", u.parallel));
    s.push_str(&format!("dump_basis = {}\n", u.dump_basis));
    s.push_str("\n[sources]\n");
    for t in &c.sources.terms {
        s.push_str(&format!("source = {}\n", fmt_source(t)));
    }
    s.push_str(&format!("balance = {}\n", c.sources.balance));
    let o = &c.output;
    s.push_str("\n[output]\n");
    s.push_str(&format!("dir = {}\n", o.dir));
    s.push_str(&format!("snapshots = {}\n", fmt_list(&o.snapshots)));
    s.push_str(&format!("vtk = {}\n", o.vtk));
    s
}

pub fn write_config(path: &Path, c: &ExperimentConfig) -> Result<()> {
    std::fs::write(path, serialize_config(c))?;
    Ok(())
}
