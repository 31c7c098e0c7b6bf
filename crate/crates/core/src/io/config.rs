//! Sectioned `key = value` case configuration.
//!
//! ```text
//! # comment
//! [case]        name, seed, precision (single | double), dump_every
//! [mesh]        kind = cavity | poiseuille | box | channel | bfs | vortex_street, plus kind keys
//! [fluid]       viscosity, delta, source (none | wall_forcing | "x y [z]")
//! [initial]     kind = rest | gaussian | reichardt, plus kind keys
//! [time]        exactly one of dt / cfl (+ max_dt); exactly one of steps / horizon / steady_tol (+ max_steps)
//! [solver]      correctors, non_orthogonal (auto | N), tolerance, adjoint_tolerance, max_iter, precond
//! [stats]       start, interval, max_order
//! [optimization] iterations, path, weight_decay, loss_scale, stop_loss
//! [optimization.<parameter>] initial, target, learning_rate
//! ```
//!
//! Vectors are whitespace-separated numbers. Every key is checked; unknown keys, sections and
//! duplicates are errors anchored at their line and column.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::adjoint::GradientPath;
use crate::cases::{
    CaseConfig, Duration, InitialCondition, MeshSpec, OptimizationSpec, Parameter, ParameterSpec, SolverSettings, SourceSpec, StatsPlan,
    StepSize, TimeControl,
};
use crate::error::{Error, Result};
use crate::linalg::Precond;
use crate::math::Vec3;
use crate::mesh::generate::{BfsParams, VortexStreetParams};
use crate::mesh::Side;
use crate::piso::Precision;

#[derive(Clone, Debug)]
struct Entry {
    value: String,
    line: usize,
    key_col: usize,
    value_col: usize,
    used: bool,
}

#[derive(Debug)]
struct Section {
    line: usize,
    entries: BTreeMap<String, Entry>,
}

struct Ctx<'a> {
    file: &'a str,
}

impl Ctx<'_> {
    fn err(&self, line: usize, column: usize, message: impl Into<String>) -> Error {
        Error::Config { file: self.file.to_string(), line, column, message: message.into() }
    }
}

struct Table<'a, 'c> {
    ctx: &'c Ctx<'a>,
    name: String,
    section: Section,
}

impl<'a, 'c> Table<'a, 'c> {
    fn raw(&mut self, key: &str) -> Option<Entry> {
        self.section.entries.get_mut(key).map(|e| {
            e.used = true;
            e.clone()
        })
    }

    fn has(&self, key: &str) -> bool {
        self.section.entries.contains_key(key)
    }

    fn parsed<T>(&mut self, key: &str, what: &str, f: impl Fn(&str) -> Option<T>) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => {
                f(&e.value).map(Some).ok_or_else(|| self.ctx.err(e.line, e.value_col, format!("`{key}` expects {what}, got `{}`", e.value)))
            }
        }
    }

    fn required<T>(&mut self, key: &str, what: &str, f: impl Fn(&str) -> Option<T>) -> Result<T> {
        let line = self.section.line;
        let name = self.name.clone();
        self.parsed(key, what, f)?.ok_or_else(|| self.ctx.err(line, 1, format!("[{name}] requires `{key}`")))
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        self.parsed(key, "a number", parse_f64)
    }

    fn req_f64(&mut self, key: &str) -> Result<f64> {
        self.required(key, "a number", parse_f64)
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>> {
        self.parsed(key, "a nonnegative integer", |s| s.parse().ok())
    }

    fn req_usize(&mut self, key: &str) -> Result<usize> {
        self.required(key, "a nonnegative integer", |s| s.parse().ok())
    }

    fn vec(&mut self, key: &str, len: std::ops::RangeInclusive<usize>) -> Result<Option<Vec<f64>>> {
        let what = format!("{}..={} numbers", len.start(), len.end());
        self.parsed(key, &what, |s| {
            let v: Option<Vec<f64>> = s.split_whitespace().map(parse_f64).collect();
            v.filter(|v| len.contains(&v.len()))
        })
    }

    fn uvec(&mut self, key: &str, len: usize) -> Result<Vec<usize>> {
        let what = format!("{len} integers");
        self.required(key, &what, |s| {
            let v: Option<Vec<usize>> = s.split_whitespace().map(|t| t.parse().ok()).collect();
            v.filter(|v| v.len() == len)
        })
    }

    fn string(&mut self, key: &str) -> Option<String> {
        self.raw(key).map(|e| e.value)
    }

    /// Errors on the first key outside `allowed`, so misspellings are reported before any
    /// missing-key diagnostics.
    fn allow(&self, allowed: &[&str]) -> Result<()> {
        match self.section.entries.iter().filter(|(k, _)| !allowed.contains(&k.as_str())).min_by_key(|(_, e)| e.line) {
            Some((k, e)) => Err(self.ctx.err(e.line, e.key_col, format!("unknown key `{k}` in [{}]", self.name))),
            None => Ok(()),
        }
    }

    /// Errors on the first key that was never read.
    fn finish(self) -> Result<()> {
        match self.section.entries.iter().filter(|(_, e)| !e.used).min_by_key(|(_, e)| e.line) {
            Some((k, e)) => Err(self.ctx.err(e.line, e.key_col, format!("unknown key `{k}` in [{}]", self.name))),
            None => Ok(()),
        }
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

fn to_vec3(v: &[f64]) -> Vec3 {
    std::array::from_fn(|i| v.get(i).copied().unwrap_or(0.0))
}

fn to_res(v: &[usize]) -> [usize; 3] {
    std::array::from_fn(|i| v.get(i).copied().unwrap_or(1))
}

fn lex(text: &str, ctx: &Ctx<'_>) -> Result<Vec<(String, Section)>> {
    let mut sections: Vec<(String, Section)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .map(str::trim)
                .filter(|n| !n.is_empty())
                .ok_or_else(|| ctx.err(line, indent + 1, "malformed section header"))?;
            if sections.iter().any(|(n, _)| n == name) {
                return Err(ctx.err(line, indent + 1, format!("duplicate section [{name}]")));
            }
            sections.push((name.to_string(), Section { line, entries: BTreeMap::new() }));
            continue;
        }
        let eq = content.find('=').ok_or_else(|| ctx.err(line, indent + 1, "expected `key = value`"))?;
        let key = content[..eq].trim();
        let value = content[eq + 1..].trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(ctx.err(line, indent + 1, "invalid key"));
        }
        if value.is_empty() {
            return Err(ctx.err(line, eq + 2, format!("missing value for `{key}`")));
        }
        let value_col = eq + 2 + (content[eq + 1..].len() - content[eq + 1..].trim_start().len());
        let (_, section) = sections.last_mut().ok_or_else(|| ctx.err(line, indent + 1, "key outside of any section"))?;
        if section.entries.contains_key(key) {
            return Err(ctx.err(line, indent + 1, format!("duplicate key `{key}`")));
        }
        let entry = Entry { value: value.to_string(), line, key_col: indent + 1, value_col, used: false };
        section.entries.insert(key.to_string(), entry);
    }
    Ok(sections)
}

/// Parses and validates a configuration; `file` only labels diagnostics.
pub fn parse_config(text: &str, file: &str) -> Result<CaseConfig> {
    let ctx = Ctx { file };
    let mut sections = lex(text, &ctx)?;
    let mut take = |name: &str| -> Option<Table<'_, '_>> {
        let i = sections.iter().position(|(n, _)| n == name)?;
        let (name, section) = sections.remove(i);
        Some(Table { ctx: &ctx, name, section })
    };

    let mut case = take("case");
    if let Some(t) = &case {
        t.allow(&["name", "seed", "precision", "dump_every"])?;
    }
    let name = case.as_mut().and_then(|t| t.string("name")).unwrap_or_else(|| "case".into());
    let mesh_table = take("mesh").ok_or_else(|| ctx.err(1, 1, "missing [mesh] section"))?;
    let mesh = parse_mesh(mesh_table)?;

    let time_table = take("time").ok_or_else(|| ctx.err(1, 1, "missing [time] section"))?;
    let time = parse_time(time_table)?;

    let mut fluid = take("fluid").ok_or_else(|| ctx.err(1, 1, "missing [fluid] section"))?;
    fluid.allow(&["viscosity", "delta", "source"])?;
    let viscosity = fluid.req_f64("viscosity")?;
    let mut cfg = CaseConfig::new(name, mesh, viscosity, time);
    if let Some(d) = fluid.f64("delta")? {
        cfg.delta = d;
    }
    cfg.source = match fluid.raw("source") {
        None => SourceSpec::None,
        Some(e) => match e.value.as_str() {
            "none" => SourceSpec::None,
            "wall_forcing" => SourceSpec::WallForcing,
            s => {
                let v: Option<Vec<f64>> = s.split_whitespace().map(parse_f64).collect();
                match v.filter(|v| (1..=3).contains(&v.len())) {
                    Some(v) => SourceSpec::Uniform(to_vec3(&v)),
                    None => return Err(ctx.err(e.line, e.value_col, "source expects none, wall_forcing or 1..=3 numbers")),
                }
            }
        },
    };
    fluid.finish()?;

    if let Some(mut t) = case {
        if let Some(seed) = t.parsed("seed", "an integer", |s| s.parse::<u64>().ok())? {
            cfg.seed = seed;
        }
        if let Some(p) = t.parsed("precision", "single or double", parse_precision)? {
            cfg.precision = p;
        }
        cfg.dump_every = t.usize("dump_every")?;
        t.finish()?;
    }
    if let Some(t) = take("initial") {
        cfg.initial = parse_initial(t)?;
    }
    if let Some(t) = take("solver") {
        cfg.solver = parse_solver(t)?;
    }
    if let Some(mut t) = take("stats") {
        t.allow(&["start", "interval", "max_order"])?;
        let d = StatsPlan::default();
        cfg.stats = Some(StatsPlan {
            start: t.usize("start")?.unwrap_or(d.start),
            interval: t.usize("interval")?.unwrap_or(d.interval),
            max_order: t.usize("max_order")?.unwrap_or(d.max_order),
        });
        t.finish()?;
    }
    if let Some(t) = take("optimization") {
        let line = t.section.line;
        let mut params = Vec::new();
        while let Some(i) = sections.iter().position(|(n, _)| n.starts_with("optimization.")) {
            let (sname, section) = sections.remove(i);
            let pname = &sname["optimization.".len()..];
            let parameter: Parameter = pname.parse().map_err(|_| ctx.err(section.line, 2, format!("unknown parameter `{pname}`")))?;
            let mut pt = Table { ctx: &ctx, name: sname.clone(), section };
            pt.allow(&["initial", "target", "learning_rate"])?;
            params.push(ParameterSpec {
                parameter,
                initial: pt.req_f64("initial")?,
                target: pt.req_f64("target")?,
                learning_rate: pt.req_f64("learning_rate")?,
            });
            pt.finish()?;
        }
        if params.is_empty() {
            return Err(ctx.err(line, 1, "[optimization] needs at least one [optimization.<parameter>] section"));
        }
        cfg.optimization = Some(parse_optimization(t, params)?);
    }
    if let Some((name, s)) = sections.first() {
        return Err(ctx.err(s.line, 2, format!("unknown section [{name}]")));
    }
    cfg.validate().map_err(|e| match e {
        Error::InvalidInput(m) => ctx.err(1, 1, m),
        e => e,
    })?;
    Ok(cfg)
}

fn parse_precision(s: &str) -> Option<Precision> {
    match s {
        "single" => Some(Precision::Single),
        "double" => Some(Precision::Double),
        _ => None,
    }
}

fn parse_mesh(mut t: Table<'_, '_>) -> Result<MeshSpec> {
    let kind = t.required("kind", "a mesh kind", |s| Some(s.to_string()))?;
    let kind_line = t.section.entries["kind"].line;
    let kind_col = t.section.entries["kind"].value_col;
    let keys: &[&str] = match kind.as_str() {
        "cavity" => &["n", "size", "lid_side", "lid_velocity"],
        "poiseuille" => &["n", "theta_max"],
        "box" => &["dim", "resolution", "size", "periodic"],
        "channel" => &["dim", "resolution", "size", "base"],
        "bfs" => &["step", "inlet_length", "channel_length", "buffer_length", "cells_per_step", "inflow_velocity"],
        "vortex_street" => &["length", "height", "obstacle", "cells_per_unit", "inflow_velocity"],
        _ => &[],
    };
    if !keys.is_empty() {
        t.allow(&[keys, &["kind"]].concat())?;
    }
    let spec = match kind.as_str() {
        "cavity" => MeshSpec::Cavity {
            n: t.req_usize("n")?,
            size: t.f64("size")?.unwrap_or(1.0),
            lid_side: t.parsed("lid_side", "a side such as +y", Side::parse)?.unwrap_or(Side::upper(1)),
            lid_velocity: t.f64("lid_velocity")?.unwrap_or(1.0),
        },
        "poiseuille" => MeshSpec::Poiseuille { n: t.req_usize("n")?, theta_max: t.f64("theta_max")?.unwrap_or(0.0) },
        "box" | "channel" => {
            let dim = t.usize("dim")?.unwrap_or(2);
            if !(2..=3).contains(&dim) {
                return Err(t.ctx.err(t.section.line, 1, "dim must be 2 or 3"));
            }
            let resolution = to_res(&t.uvec("resolution", dim)?);
            let size = to_vec3(&t.vec("size", dim..=dim)?.unwrap_or_else(|| vec![1.0; dim]));
            let size = if dim == 2 { [size[0], size[1], 1.0] } else { size };
            if kind == "box" {
                let periodic = t
                    .parsed("periodic", "booleans per axis", |s| {
                        let v: Option<Vec<bool>> = s.split_whitespace().map(parse_bool).collect();
                        v.filter(|v| v.len() == dim)
                    })?
                    .unwrap_or_else(|| vec![false; dim]);
                let periodic = std::array::from_fn(|i| periodic.get(i).copied().unwrap_or(false));
                MeshSpec::Box { dim, resolution, size, periodic }
            } else {
                MeshSpec::Channel { dim, resolution, size, base: t.f64("base")?.unwrap_or(1.0) }
            }
        }
        "bfs" => {
            let d = BfsParams::default();
            MeshSpec::BackwardStep(BfsParams {
                step: t.f64("step")?.unwrap_or(d.step),
                inlet_length: t.f64("inlet_length")?.unwrap_or(d.inlet_length),
                channel_length: t.f64("channel_length")?.unwrap_or(d.channel_length),
                buffer_length: t.f64("buffer_length")?.unwrap_or(d.buffer_length),
                cells_per_step: t.usize("cells_per_step")?.unwrap_or(d.cells_per_step),
                inflow_velocity: t.f64("inflow_velocity")?.unwrap_or(d.inflow_velocity),
            })
        }
        "vortex_street" => {
            let d = VortexStreetParams::default();
            let obstacle = t.vec("obstacle", 3..=3)?.map(|v| to_vec3(&v)).unwrap_or(d.obstacle);
            MeshSpec::VortexStreet(VortexStreetParams {
                length: t.f64("length")?.unwrap_or(d.length),
                height: t.f64("height")?.unwrap_or(d.height),
                obstacle,
                cells_per_unit: t.usize("cells_per_unit")?.unwrap_or(d.cells_per_unit),
                inflow_velocity: t.f64("inflow_velocity")?.unwrap_or(d.inflow_velocity),
            })
        }
        other => return Err(t.ctx.err(kind_line, kind_col, format!("unknown mesh kind `{other}`"))),
    };
    t.finish()?;
    Ok(spec)
}

fn parse_time(mut t: Table<'_, '_>) -> Result<TimeControl> {
    t.allow(&["dt", "cfl", "max_dt", "steps", "horizon", "steady_tol", "max_steps"])?;
    let line = t.section.line;
    let step = match (t.has("dt"), t.has("cfl")) {
        (true, false) => StepSize::Fixed(t.req_f64("dt")?),
        (false, true) => StepSize::Cfl { target: t.req_f64("cfl")?, max_dt: t.f64("max_dt")?.unwrap_or(f64::MAX) },
        _ => return Err(t.ctx.err(line, 1, "[time] needs exactly one of `dt` and `cfl`")),
    };
    let duration = match (t.has("steps"), t.has("horizon"), t.has("steady_tol")) {
        (true, false, false) => Duration::Steps(t.req_usize("steps")?),
        (false, true, false) => Duration::Horizon(t.req_f64("horizon")?),
        (false, false, true) => Duration::Steady { tol: t.req_f64("steady_tol")?, max_steps: t.usize("max_steps")?.unwrap_or(10_000) },
        _ => return Err(t.ctx.err(line, 1, "[time] needs exactly one of `steps`, `horizon` and `steady_tol`")),
    };
    t.finish()?;
    Ok(TimeControl { step, duration })
}

fn parse_initial(mut t: Table<'_, '_>) -> Result<InitialCondition> {
    t.allow(&["kind", "amplitude", "sigma", "re_tau", "perturbation", "seed"])?;
    let kind = t.required("kind", "an initial condition kind", |s| Some(s.to_string()))?;
    let e = &t.section.entries["kind"];
    let (line, col) = (e.line, e.value_col);
    let ic = match kind.as_str() {
        "rest" => InitialCondition::Rest,
        "gaussian" => InitialCondition::Gaussian { amplitude: t.f64("amplitude")?.unwrap_or(1.0), sigma: t.f64("sigma")? },
        "reichardt" => InitialCondition::Reichardt {
            re_tau: t.req_f64("re_tau")?,
            perturbation: t.f64("perturbation")?.unwrap_or(0.0),
            seed: t.parsed("seed", "an integer", |s| s.parse::<u64>().ok())?.unwrap_or(0),
        },
        other => return Err(t.ctx.err(line, col, format!("unknown initial condition `{other}`"))),
    };
    t.finish()?;
    Ok(ic)
}

fn parse_solver(mut t: Table<'_, '_>) -> Result<SolverSettings> {
    t.allow(&["correctors", "non_orthogonal", "tolerance", "adjoint_tolerance", "max_iter", "precond"])?;
    let d = SolverSettings::default();
    let s = SolverSettings {
        correctors: t.usize("correctors")?.unwrap_or(d.correctors),
        non_orthogonal_correctors: t
            .parsed("non_orthogonal", "auto or an integer", |s| match s {
                "auto" => Some(None),
                n => n.parse().ok().map(Some),
            })?
            .unwrap_or(d.non_orthogonal_correctors),
        tolerance: t.f64("tolerance")?,
        adjoint_tolerance: t.f64("adjoint_tolerance")?,
        max_iter: t.usize("max_iter")?.unwrap_or(d.max_iter),
        velocity_precond: t
            .parsed("precond", "none, ilu0 or fallback", |s| match s {
                "none" => Some(Precond::None),
                "ilu0" => Some(Precond::Ilu0),
                "fallback" => Some(Precond::Fallback),
                _ => None,
            })?
            .unwrap_or(d.velocity_precond),
    };
    t.finish()?;
    Ok(s)
}

fn parse_optimization(mut t: Table<'_, '_>, parameters: Vec<ParameterSpec>) -> Result<OptimizationSpec> {
    t.allow(&["iterations", "path", "weight_decay", "loss_scale", "stop_loss"])?;
    let o = OptimizationSpec {
        parameters,
        iterations: t.req_usize("iterations")?,
        path: t.parsed("path", "full, adv, p or none", |s| s.parse::<GradientPath>().ok())?.unwrap_or(GradientPath::Full),
        weight_decay: t.f64("weight_decay")?.unwrap_or(0.0),
        loss_scale: t.f64("loss_scale")?.unwrap_or(1.0),
        stop_loss: t.f64("stop_loss")?,
    };
    t.finish()?;
    Ok(o)
}

fn nums(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

fn ints(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

/// Canonical text form; `parse_config(print_config(c)) == c` for every valid `c`.
pub fn print_config(c: &CaseConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[case]\nname = {}\nseed = {}\nprecision = {}", c.name, c.seed, c.precision.name());
    if let Some(n) = c.dump_every {
        let _ = writeln!(s, "dump_every = {n}");
    }
    let _ = writeln!(s, "\n[mesh]\nkind = {}", c.mesh.kind());
    match &c.mesh {
        MeshSpec::Cavity { n, size, lid_side, lid_velocity } => {
            let _ = writeln!(s, "n = {n}\nsize = {size:?}\nlid_side = {}\nlid_velocity = {lid_velocity:?}", lid_side.name());
        }
        MeshSpec::Poiseuille { n, theta_max } => {
            let _ = writeln!(s, "n = {n}\ntheta_max = {theta_max:?}");
        }
        MeshSpec::Box { dim, resolution, size, periodic } => {
            let p: Vec<&str> = periodic[..*dim].iter().map(|&b| if b { "true" } else { "false" }).collect();
            let _ = writeln!(
                s,
                "dim = {dim}\nresolution = {}\nsize = {}\nperiodic = {}",
                ints(&resolution[..*dim]),
                nums(&size[..*dim]),
                p.join(" ")
            );
        }
        MeshSpec::Channel { dim, resolution, size, base } => {
            let _ = writeln!(s, "dim = {dim}\nresolution = {}\nsize = {}\nbase = {base:?}", ints(&resolution[..*dim]), nums(&size[..*dim]));
        }
        MeshSpec::BackwardStep(p) => {
            let _ = writeln!(
                s,
                "step = {:?}\ninlet_length = {:?}\nchannel_length = {:?}\nbuffer_length = {:?}\ncells_per_step = {}\ninflow_velocity = {:?}",
                p.step, p.inlet_length, p.channel_length, p.buffer_length, p.cells_per_step, p.inflow_velocity
            );
        }
        MeshSpec::VortexStreet(p) => {
            let _ = writeln!(
                s,
                "length = {:?}\nheight = {:?}\nobstacle = {}\ncells_per_unit = {}\ninflow_velocity = {:?}",
                p.length,
                p.height,
                nums(&p.obstacle),
                p.cells_per_unit,
                p.inflow_velocity
            );
        }
    }
    let source = match &c.source {
        SourceSpec::None => "none".to_string(),
        SourceSpec::WallForcing => "wall_forcing".to_string(),
        SourceSpec::Uniform(v) => nums(v),
    };
    let _ = writeln!(s, "\n[fluid]\nviscosity = {:?}\ndelta = {:?}\nsource = {source}", c.viscosity, c.delta);
    let _ = writeln!(s, "\n[initial]");
    match c.initial {
        InitialCondition::Rest => {
            let _ = writeln!(s, "kind = rest");
        }
        InitialCondition::Gaussian { amplitude, sigma } => {
            let _ = writeln!(s, "kind = gaussian\namplitude = {amplitude:?}");
            if let Some(sg) = sigma {
                let _ = writeln!(s, "sigma = {sg:?}");
            }
        }
        InitialCondition::Reichardt { re_tau, perturbation, seed } => {
            let _ = writeln!(s, "kind = reichardt\nre_tau = {re_tau:?}\nperturbation = {perturbation:?}\nseed = {seed}");
        }
    }
    let _ = writeln!(s, "\n[time]");
    match c.time.step {
        StepSize::Fixed(dt) => {
            let _ = writeln!(s, "dt = {dt:?}");
        }
        StepSize::Cfl { target, max_dt } => {
            let _ = writeln!(s, "cfl = {target:?}\nmax_dt = {max_dt:?}");
        }
    }
    match c.time.duration {
        Duration::Steps(n) => {
            let _ = writeln!(s, "steps = {n}");
        }
        Duration::Horizon(t) => {
            let _ = writeln!(s, "horizon = {t:?}");
        }
        Duration::Steady { tol, max_steps } => {
            let _ = writeln!(s, "steady_tol = {tol:?}\nmax_steps = {max_steps}");
        }
    }
    let sv = &c.solver;
    let non_orth = sv.non_orthogonal_correctors.map_or("auto".to_string(), |n| n.to_string());
    let precond = match sv.velocity_precond {
        Precond::None => "none",
        Precond::Ilu0 => "ilu0",
        Precond::Fallback => "fallback",
    };
    let _ = writeln!(s, "\n[solver]\ncorrectors = {}\nnon_orthogonal = {non_orth}", sv.correctors);
    if let Some(tol) = sv.tolerance {
        let _ = writeln!(s, "tolerance = {tol:?}");
    }
    if let Some(tol) = sv.adjoint_tolerance {
        let _ = writeln!(s, "adjoint_tolerance = {tol:?}");
    }
    let _ = writeln!(s, "max_iter = {}\nprecond = {precond}", sv.max_iter);
    if let Some(p) = c.stats {
        let _ = writeln!(s, "\n[stats]\nstart = {}\ninterval = {}\nmax_order = {}", p.start, p.interval, p.max_order);
    }
    if let Some(o) = &c.optimization {
        let _ = writeln!(
            s,
            "\n[optimization]\niterations = {}\npath = {}\nweight_decay = {:?}\nloss_scale = {:?}",
            o.iterations, o.path, o.weight_decay, o.loss_scale
        );
        if let Some(stop) = o.stop_loss {
            let _ = writeln!(s, "stop_loss = {stop:?}");
        }
        for p in &o.parameters {
            let _ = writeln!(
                s,
                "\n[optimization.{}]\ninitial = {:?}\ntarget = {:?}\nlearning_rate = {:?}",
                p.parameter, p.initial, p.target, p.learning_rate
            );
        }
    }
    s
}
