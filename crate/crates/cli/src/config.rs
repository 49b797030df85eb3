//! Flat sectioned `key = value` configuration.
//!
//! ```text
//! [params]   g rho h_s h_0 zeta_w l_0 r l_1 gamma P_atm h_ch K
//! [domain]   l_ext n_minus n_pl n_pr [left_boundary]
//! [solver]   t_end [cfl scheme ode_stepper picard record_every snapshot_every fixed_dt compat_tol]
//! [initial]  [profile q_i P_ch c_0 c_1]
//! [forcing]  [inflow]
//! ```
//!
//! `#` starts a comment. Every error carries the line it was found on.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use owc_core::coupling::DEFAULT_COMPATIBILITY_TOL;
use owc_core::model::{
    BoundaryState, DomainLayout, DomainTag, FieldState, PhysicalParams, Thresholds,
};
use owc_core::solver::{
    Forcing, LeftBoundary, OdeStepper, PicardMode, Problem, Scheme, SolverConfig,
};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },

    #[error("missing key `{key}` in [{section}]")]
    MissingKey {
        section: &'static str,
        key: &'static str,
    },

    #[error("{key}: {message}")]
    Invalid { key: String, message: String },

    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

/// All problems found in one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

impl From<ConfigError> for ConfigErrors {
    fn from(e: ConfigError) -> Self {
        ConfigErrors(vec![e])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    Rest,
    /// `zeta = amplitude exp(-((x - center)/width)²)`, `q = 0`, on every exterior cell.
    Gaussian {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// CSV with columns `x, zeta, q`, one row per cell in domain order.
    File(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialSpec {
    pub profile: Profile,
    pub q_i: f64,
    pub p_ch: f64,
    /// Thresholds of the initial-data gate; `None` uses the defaults.
    pub c_0: Option<f64>,
    pub c_1: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainSpec {
    pub l_ext: f64,
    pub n_minus: usize,
    pub n_pl: usize,
    pub n_pr: usize,
    pub left_boundary: LeftBoundary,
}

/// A validated configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: PhysicalParams<f64>,
    pub domain: DomainSpec,
    pub solver: SolverConfig<f64>,
    pub compat_tol: f64,
    pub initial: InitialSpec,
    pub forcing: Forcing<f64>,
    /// Directory relative paths in the file are resolved against.
    pub base_dir: PathBuf,
}

const SECTIONS: [&str; 5] = ["params", "domain", "solver", "initial", "forcing"];

const KEYS: [(&str, &[&str]); 5] = [
    (
        "params",
        &[
            "g", "rho", "h_s", "h_0", "zeta_w", "l_0", "r", "l_1", "gamma", "P_atm", "h_ch", "K",
        ],
    ),
    (
        "domain",
        &["l_ext", "n_minus", "n_pl", "n_pr", "left_boundary"],
    ),
    (
        "solver",
        &[
            "cfl",
            "t_end",
            "scheme",
            "ode_stepper",
            "picard",
            "record_every",
            "snapshot_every",
            "fixed_dt",
            "compat_tol",
        ],
    ),
    ("initial", &["profile", "q_i", "P_ch", "c_0", "c_1"]),
    ("forcing", &["inflow"]),
];

fn known(section: &str, key: &str) -> Option<(&'static str, &'static str)> {
    KEYS.iter()
        .find(|(s, _)| *s == section)
        .and_then(|(s, keys)| keys.iter().find(|k| **k == key).map(|k| (*s, *k)))
}

/// Resolves `section.key` or a key name that is unique across sections.
pub fn resolve_key(name: &str) -> Option<(&'static str, &'static str)> {
    if let Some((s, k)) = name.split_once('.') {
        return known(s, k);
    }
    let hits: Vec<_> = KEYS
        .iter()
        .filter_map(|(s, keys)| keys.iter().find(|k| **k == name).map(|k| (*s, *k)))
        .collect();
    if hits.len() == 1 {
        Some(hits[0])
    } else {
        None
    }
}

type Raw = BTreeMap<(&'static str, &'static str), (usize, String)>;

fn lex(text: &str, errors: &mut Vec<ConfigError>) -> Raw {
    let mut raw = Raw::new();
    let mut section: Option<&'static str> = None;
    for (k, line) in text.lines().enumerate() {
        let line_no = k + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                errors.push(ConfigError::Parse {
                    line: line_no,
                    message: format!("malformed section header `{body}`"),
                });
                continue;
            };
            match SECTIONS.iter().find(|s| **s == name.trim()) {
                Some(s) => section = Some(s),
                None => {
                    errors.push(ConfigError::Parse {
                        line: line_no,
                        message: format!("unknown section [{}]", name.trim()),
                    });
                    section = None;
                }
            }
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            errors.push(ConfigError::Parse {
                line: line_no,
                message: format!("expected `key = value`, found `{body}`"),
            });
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(sec) = section else {
            errors.push(ConfigError::Parse {
                line: line_no,
                message: format!("key `{key}` outside a known section"),
            });
            continue;
        };
        match known(sec, key) {
            Some(id) => {
                if let Some((first, _)) = raw.insert(id, (line_no, value.to_string())) {
                    errors.push(ConfigError::Parse {
                        line: line_no,
                        message: format!("duplicate key `{key}` (first on line {first})"),
                    });
                }
            }
            None => errors.push(ConfigError::UnknownKey {
                line: line_no,
                section: sec.to_string(),
                key: key.to_string(),
            }),
        }
    }
    raw
}

/// Typed access to the raw table, collecting errors instead of stopping.
struct Reader<'a> {
    raw: &'a Raw,
    errors: Vec<ConfigError>,
}

impl Reader<'_> {
    fn get<V>(
        &mut self,
        section: &'static str,
        key: &'static str,
        default: Option<V>,
        parse: impl Fn(&str) -> Result<V, String>,
    ) -> Option<V> {
        match self.raw.get(&(section, key)) {
            Some((line, text)) => match parse(text) {
                Ok(v) => Some(v),
                Err(message) => {
                    self.errors.push(ConfigError::Parse {
                        line: *line,
                        message: format!("{key}: {message}"),
                    });
                    None
                }
            },
            None => {
                if default.is_none() {
                    self.errors.push(ConfigError::MissingKey { section, key });
                }
                default
            }
        }
    }

    fn real(
        &mut self,
        section: &'static str,
        key: &'static str,
        default: Option<f64>,
    ) -> Option<f64> {
        self.get(section, key, default, parse_real)
    }

    fn count(
        &mut self,
        section: &'static str,
        key: &'static str,
        default: Option<usize>,
    ) -> Option<usize> {
        self.get(section, key, default, |s| {
            s.parse::<usize>()
                .map_err(|e| format!("`{s}` is not a count ({e})"))
        })
    }
}

fn parse_real(s: &str) -> Result<f64, String> {
    s.parse::<f64>()
        .map_err(|_| format!("`{s}` is not a number"))
}

/// Splits `name(a, b, ...)` into the name and its arguments.
fn call(s: &str) -> Option<(&str, Vec<&str>)> {
    let open = s.find('(')?;
    let inner = s[open + 1..].strip_suffix(')')?;
    let args = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner.split(',').map(str::trim).collect()
    };
    Some((s[..open].trim(), args))
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    if s == "rest" {
        return Ok(Profile::Rest);
    }
    match call(s) {
        Some(("gaussian", args)) if args.len() == 3 => Ok(Profile::Gaussian {
            amplitude: parse_real(args[0])?,
            center: parse_real(args[1])?,
            width: parse_real(args[2])?,
        }),
        Some(("file", args)) if args.len() == 1 && !args[0].is_empty() => {
            Ok(Profile::File(args[0].to_string()))
        }
        _ => Err(format!(
            "`{s}`: expected rest, gaussian(amplitude, center, width) or file(path)"
        )),
    }
}

fn parse_forcing(s: &str) -> Result<Forcing<f64>, String> {
    if s == "none" {
        return Ok(Forcing::None);
    }
    match call(s) {
        Some(("sine", args)) if args.len() == 2 => Ok(Forcing::Sine {
            amplitude: parse_real(args[0])?,
            omega: parse_real(args[1])?,
        }),
        _ => Err(format!("`{s}`: expected none or sine(amplitude, omega)")),
    }
}

fn parse_picard(s: &str) -> Result<PicardMode<f64>, String> {
    if s == "off" {
        return Ok(PicardMode::Off);
    }
    match call(s) {
        Some(("on", args)) if args.len() == 2 => Ok(PicardMode::On {
            max_iter: args[0]
                .parse()
                .map_err(|_| format!("`{}` is not a count", args[0]))?,
            tol: parse_real(args[1])?,
        }),
        _ => Err(format!("`{s}`: expected off or on(max_iter, tol)")),
    }
}

fn parse_fixed_dt(s: &str) -> Result<Option<f64>, String> {
    if s == "none" {
        Ok(None)
    } else {
        parse_real(s).map(Some)
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigErrors> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigErrors> {
        Self::parse_with(text, base_dir, &[])
    }

    /// Parses `text` with some keys replaced; used by parameter sweeps.
    pub fn parse_with(
        text: &str,
        base_dir: &Path,
        overrides: &[((&'static str, &'static str), String)],
    ) -> Result<Self, ConfigErrors> {
        let mut errors = Vec::new();
        let mut raw = lex(text, &mut errors);
        for (id, v) in overrides {
            raw.insert(*id, (0, v.clone()));
        }
        let mut r = Reader { raw: &raw, errors };

        let pv: Vec<Option<f64>> = KEYS[0]
            .1
            .iter()
            .map(|k| r.real("params", k, None))
            .collect();
        let l_ext = r.real("domain", "l_ext", None);
        let n_minus = r.count("domain", "n_minus", None);
        let n_pl = r.count("domain", "n_pl", None);
        let n_pr = r.count("domain", "n_pr", None);
        let left_boundary = r.get("domain", "left_boundary", Some(LeftBoundary::Open), |s| {
            LeftBoundary::parse(s).ok_or_else(|| format!("`{s}`: expected wall or open"))
        });

        let defaults = SolverConfig::<f64>::new(1.0);
        let cfl = r.real("solver", "cfl", Some(defaults.cfl));
        let t_end = r.real("solver", "t_end", None);
        let scheme = r.get("solver", "scheme", Some(defaults.scheme), |s| {
            Scheme::parse(s).ok_or_else(|| format!("`{s}`: expected rusanov, hll or muscl_rusanov"))
        });
        let ode_stepper = r.get("solver", "ode_stepper", Some(defaults.ode_stepper), |s| {
            OdeStepper::parse(s).ok_or_else(|| format!("`{s}`: expected euler, rk2 or rk4"))
        });
        let picard = r.get("solver", "picard", Some(PicardMode::Off), parse_picard);
        let record_every = r.count("solver", "record_every", Some(defaults.record_every));
        let snapshot_every = r.count("solver", "snapshot_every", Some(defaults.snapshot_every));
        let fixed_dt = r.get("solver", "fixed_dt", Some(None), parse_fixed_dt);
        let compat_tol = r.real("solver", "compat_tol", Some(DEFAULT_COMPATIBILITY_TOL));

        let profile = r.get("initial", "profile", Some(Profile::Rest), parse_profile);
        let q_i = r.real("initial", "q_i", Some(0.0));
        let p_ch = r.real("initial", "P_ch", Some(0.0));
        let c_0 = r.get("initial", "c_0", Some(None), |s| parse_real(s).map(Some));
        let c_1 = r.get("initial", "c_1", Some(None), |s| parse_real(s).map(Some));
        let forcing = r.get("forcing", "inflow", Some(Forcing::None), parse_forcing);

        let mut errors = r.errors;
        let built = (|| {
            let p: Vec<f64> = pv.into_iter().collect::<Option<_>>()?;
            let params = PhysicalParams {
                g: p[0],
                rho: p[1],
                h_s: p[2],
                h_0: p[3],
                zeta_w: p[4],
                l_0: p[5],
                r: p[6],
                l_1: p[7],
                gamma: p[8],
                p_atm: p[9],
                h_ch: p[10],
                k: p[11],
            };
            let solver = SolverConfig {
                cfl: cfl?,
                t_end: t_end?,
                scheme: scheme?,
                ode_stepper: ode_stepper?,
                picard: picard?,
                record_every: record_every?,
                snapshot_every: snapshot_every?,
                fixed_dt: fixed_dt?,
            };
            Some(RunConfig {
                params,
                domain: DomainSpec {
                    l_ext: l_ext?,
                    n_minus: n_minus?,
                    n_pl: n_pl?,
                    n_pr: n_pr?,
                    left_boundary: left_boundary?,
                },
                solver,
                compat_tol: compat_tol?,
                initial: InitialSpec {
                    profile: profile?,
                    q_i: q_i?,
                    p_ch: p_ch?,
                    c_0: c_0?,
                    c_1: c_1?,
                },
                forcing: forcing?,
                base_dir: base_dir.to_path_buf(),
            })
        })();
        match built {
            Some(cfg) if errors.is_empty() => {
                let invalid = cfg.validation_errors();
                if invalid.is_empty() {
                    Ok(cfg)
                } else {
                    Err(ConfigErrors(invalid))
                }
            }
            _ => {
                if errors.is_empty() {
                    errors.push(ConfigError::Invalid {
                        key: "config".into(),
                        message: "incomplete configuration".into(),
                    });
                }
                Err(ConfigErrors(errors))
            }
        }
    }

    /// Parameter invariants, layout and solver settings, keyed by config name.
    pub fn validation_errors(&self) -> Vec<ConfigError> {
        let mut out: Vec<ConfigError> = self
            .params
            .validate()
            .violations
            .into_iter()
            .map(|v| ConfigError::Invalid {
                key: format!("params.{}", v.key),
                message: v.message,
            })
            .collect();
        if let Err(e) = self.solver.validate() {
            out.push(ConfigError::Invalid {
                key: "solver".into(),
                message: e.to_string(),
            });
        }
        if out.is_empty() {
            if let Err(e) = self.layout() {
                out.push(ConfigError::Invalid {
                    key: "domain".into(),
                    message: e.to_string(),
                });
            }
        }
        if self.compat_tol.is_nan() || self.compat_tol <= 0.0 {
            out.push(ConfigError::Invalid {
                key: "solver.compat_tol".into(),
                message: "must be positive".into(),
            });
        }
        if matches!(self.forcing, Forcing::Sine { .. })
            && self.domain.left_boundary == LeftBoundary::Wall
        {
            out.push(ConfigError::Invalid {
                key: "forcing.inflow".into(),
                message: "inflow forcing needs left_boundary = open".into(),
            });
        }
        out
    }

    pub fn layout(&self) -> owc_core::Result<DomainLayout<f64>> {
        let d = &self.domain;
        DomainLayout::new(&self.params, d.l_ext, d.n_minus, d.n_pl, d.n_pr)
    }

    pub fn problem(&self) -> owc_core::Result<Problem<f64>> {
        Ok(Problem::new(self.params, self.layout()?)
            .with_forcing(self.domain.left_boundary, self.forcing))
    }

    pub fn thresholds(&self) -> Thresholds<f64> {
        let d = Thresholds::default_for(&self.params);
        Thresholds {
            c_0: self.initial.c_0.unwrap_or(d.c_0),
            c_1: self.initial.c_1.unwrap_or(d.c_1),
        }
    }

    pub fn initial_g(&self) -> BoundaryState<f64> {
        BoundaryState::new(self.initial.q_i, self.initial.p_ch)
    }

    /// Cell-centre evaluation of an analytic profile; `None` for file data.
    pub fn profile_fn(&self) -> Option<impl Fn(DomainTag, f64) -> (f64, f64) + Sync + 'static> {
        let (a, c, w) = match self.initial.profile {
            Profile::Rest => (0.0, 0.0, 1.0),
            Profile::Gaussian {
                amplitude,
                center,
                width,
            } => (amplitude, center, width),
            Profile::File(_) => return None,
        };
        Some(move |_: DomainTag, x: f64| {
            if a == 0.0 {
                (0.0, 0.0)
            } else {
                (a * (-((x - c) / w).powi(2)).exp(), 0.0)
            }
        })
    }

    pub fn initial_field(
        &self,
        layout: &DomainLayout<f64>,
    ) -> Result<FieldState<f64>, ConfigErrors> {
        if let Some(f) = self.profile_fn() {
            return Ok(FieldState::from_fn(layout, f));
        }
        let Profile::File(rel) = &self.initial.profile else {
            unreachable!()
        };
        read_profile(&self.base_dir.join(rel), layout)
    }

    /// Canonical text: every key, fixed order, shortest round-trip numbers.
    pub fn to_canonical(&self) -> String {
        let p = &self.params;
        let d = &self.domain;
        let s = &self.solver;
        let mut out = String::new();
        let mut section = |name: &str, rows: Vec<(&str, String)>| {
            out.push_str(&format!("[{name}]\n"));
            for (k, v) in rows {
                out.push_str(&format!("{k} = {v}\n"));
            }
            out.push('\n');
        };
        section(
            "params",
            KEYS[0]
                .1
                .iter()
                .zip([
                    p.g, p.rho, p.h_s, p.h_0, p.zeta_w, p.l_0, p.r, p.l_1, p.gamma, p.p_atm,
                    p.h_ch, p.k,
                ])
                .map(|(k, v)| (*k, v.to_string()))
                .collect(),
        );
        section(
            "domain",
            vec![
                ("l_ext", d.l_ext.to_string()),
                ("n_minus", d.n_minus.to_string()),
                ("n_pl", d.n_pl.to_string()),
                ("n_pr", d.n_pr.to_string()),
                ("left_boundary", d.left_boundary.as_str().into()),
            ],
        );
        section(
            "solver",
            vec![
                ("cfl", s.cfl.to_string()),
                ("t_end", s.t_end.to_string()),
                ("scheme", s.scheme.as_str().into()),
                ("ode_stepper", s.ode_stepper.as_str().into()),
                (
                    "picard",
                    match s.picard {
                        PicardMode::Off => "off".into(),
                        PicardMode::On { max_iter, tol } => format!("on({max_iter}, {tol})"),
                    },
                ),
                ("record_every", s.record_every.to_string()),
                ("snapshot_every", s.snapshot_every.to_string()),
                (
                    "fixed_dt",
                    s.fixed_dt.map_or("none".into(), |v| v.to_string()),
                ),
                ("compat_tol", self.compat_tol.to_string()),
            ],
        );
        let mut initial = vec![(
            "profile",
            match &self.initial.profile {
                Profile::Rest => "rest".to_string(),
                Profile::Gaussian {
                    amplitude,
                    center,
                    width,
                } => format!("gaussian({amplitude}, {center}, {width})"),
                Profile::File(path) => format!("file({path})"),
            },
        )];
        initial.push(("q_i", self.initial.q_i.to_string()));
        initial.push(("P_ch", self.initial.p_ch.to_string()));
        if let Some(c) = self.initial.c_0 {
            initial.push(("c_0", c.to_string()));
        }
        if let Some(c) = self.initial.c_1 {
            initial.push(("c_1", c.to_string()));
        }
        section("initial", initial);
        section(
            "forcing",
            vec![(
                "inflow",
                match self.forcing {
                    Forcing::None => "none".into(),
                    Forcing::Sine { amplitude, omega } => format!("sine({amplitude}, {omega})"),
                },
            )],
        );
        out.truncate(out.trim_end().len());
        out.push('\n');
        out
    }
}

fn read_profile(path: &Path, layout: &DomainLayout<f64>) -> Result<FieldState<f64>, ConfigErrors> {
    let io = |message: String| ConfigError::Io {
        path: path.display().to_string(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| io(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| io(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(cx), Some(cz), Some(cq)) = (col("x"), col("zeta"), col("q")) else {
        return Err(io("header must contain x, zeta and q".into()).into());
    };
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| io(e.to_string()))?;
        let line = k + 2;
        let num = |c: usize| -> Result<f64, ConfigError> {
            rec.get(c)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| ConfigError::Parse {
                    line,
                    message: format!("{}: bad number in column {}", path.display(), c + 1),
                })
        };
        rows.push((num(cx)?, num(cz)?, num(cq)?));
    }
    if rows.len() != layout.total_cells() {
        return Err(io(format!(
            "{} rows, layout has {} cells",
            rows.len(),
            layout.total_cells()
        ))
        .into());
    }
    let mut field = FieldState::rest(layout);
    let mut it = rows.into_iter().enumerate();
    for (d, sub) in layout.domains.iter().enumerate() {
        for j in 0..sub.n {
            let (k, (x, z, q)) = it.next().expect("row count checked");
            if (x - sub.cell_center(j)).abs() > 1e-6 * sub.dx() {
                return Err(ConfigError::Parse {
                    line: k + 2,
                    message: format!(
                        "x = {x} is not the centre {} of cell {j} in {}",
                        sub.cell_center(j),
                        sub.tag.as_str()
                    ),
                }
                .into());
            }
            field.domains[d].zeta[j] = z;
            field.domains[d].q[j] = q;
        }
    }
    Ok(field)
}
