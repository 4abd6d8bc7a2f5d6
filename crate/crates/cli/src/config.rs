use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use ckfdirac::fields::PotentialSpec;
use ckfdirac::grid::{GridSpec, Stencil};
use ckfdirac::CkfParams;

pub const OUT_ENV: &str = "CKFDIRAC_OUT";
const DEFAULT_OUT: &str = "ckfdirac-out";

pub const SCHEMA: &str = "\
RunConfig (JSON for --config; every flag overrides the file):
  subcommand   classify | verify-identities | field-lines | loop-integrals |
               verify-operators | holonomy | spectrum-sweep | control-losyau
  ckf          \"ud\" | \"ro\" | \"cr:<mu>\" | {\"a\":[..3],\"b0\":x,\"b\":[..3],\"c\":[..3]}
  potential    \"zero\" | \"axial-bump\" | \"hopf-base:<mu>\" | \"modulated-hopf:<mu>\" |
               \"losyau\" | {\"kind\":\"hopf_base\",\"mu\":1.0} ...
  seed_points  [[x,y,z], ...]          (flag: --seed-point x,y,z, repeatable)
  points       random sample points    tolerance  check tolerance
  t_max        integration time        rk_tol     Runge-Kutta tolerance
  grid         {\"n\":24,\"l\":6.0}       (flag: --grid n,L)
  stencil      2 | 4                   ts         {\"start\":0,\"stop\":20,\"step\":1} (flag: --ts a:b:step)
  tol          eigensolver tolerance   quadrature nodes per axis for the norm check
  out          output directory (default: $CKFDIRAC_OUT, else ./ckfdirac-out)
  seed         RNG seed                threads    worker threads";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CkfArg {
    Shorthand(String),
    Params(CkfParams),
}

impl CkfArg {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            Ok(CkfArg::Params(serde_json::from_str(s).context("--ckf is not a valid parameter object")?))
        } else {
            Ok(CkfArg::Shorthand(s.to_string()))
        }
    }

    pub fn resolve(&self) -> Result<CkfParams> {
        let p = match self {
            CkfArg::Params(p) => *p,
            CkfArg::Shorthand(s) => match s.as_str() {
                "ud" => CkfParams::uniform(),
                "ro" => CkfParams::rotation(),
                _ => match s.strip_prefix("cr:") {
                    Some(mu) => CkfParams::special(positive(mu, "cr:<mu>")?),
                    None => bail!("unknown CKF shorthand `{s}`"),
                },
            },
        };
        if !p.is_finite() {
            bail!("CKF parameters must be finite");
        }
        Ok(p)
    }

    /// Potential paired with the shorthand fields by default.
    fn default_potential(&self) -> Option<PotentialSpec> {
        match self {
            CkfArg::Shorthand(s) if s == "ro" => Some(PotentialSpec::axial_bump()),
            CkfArg::Shorthand(s) => s.strip_prefix("cr:").and_then(|m| m.parse().ok()).map(PotentialSpec::modulated_hopf),
            CkfArg::Params(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialArg {
    Name(String),
    Spec(PotentialSpec),
}

impl PotentialArg {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            Ok(PotentialArg::Spec(serde_json::from_str(s).context("--potential is not a valid potential object")?))
        } else {
            Ok(PotentialArg::Name(s.to_string()))
        }
    }

    pub fn resolve(&self) -> Result<PotentialSpec> {
        let spec = match self {
            PotentialArg::Spec(s) => s.clone(),
            PotentialArg::Name(n) => match n.as_str() {
                "zero" => PotentialSpec::Zero,
                "axial-bump" => PotentialSpec::axial_bump(),
                "losyau" => PotentialSpec::LossYau,
                _ => {
                    if let Some(mu) = n.strip_prefix("hopf-base:") {
                        PotentialSpec::HopfBase { mu: positive(mu, "hopf-base:<mu>")? }
                    } else if let Some(mu) = n.strip_prefix("modulated-hopf:") {
                        PotentialSpec::modulated_hopf(positive(mu, "modulated-hopf:<mu>")?)
                    } else {
                        bail!("unknown potential `{n}`")
                    }
                }
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn positive(s: &str, what: &str) -> Result<f64> {
    let v: f64 = s.parse().with_context(|| format!("{what}: `{s}` is not a number"))?;
    if !(v > 0.0 && v.is_finite()) {
        bail!("{what}: need a positive finite value, got {v}");
    }
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridArg {
    pub n: usize,
    pub l: f64,
}

impl GridArg {
    pub fn parse(s: &str) -> Result<Self> {
        let (n, l) = s.split_once(',').context("--grid expects n,L")?;
        Ok(GridArg { n: n.trim().parse().context("--grid: n")?, l: l.trim().parse().context("--grid: L")? })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TsRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl TsRange {
    pub fn parse(s: &str) -> Result<Self> {
        let v: Vec<f64> = s.split(':').map(|x| x.trim().parse::<f64>()).collect::<Result<_, _>>().context("--ts expects a:b:step")?;
        match v[..] {
            [start, stop, step] => Ok(TsRange { start, stop, step }),
            _ => bail!("--ts expects a:b:step"),
        }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        let TsRange { start, stop, step } = *self;
        if ![start, stop, step].iter().all(|x| x.is_finite()) || step <= 0.0 || stop < start {
            bail!("--ts needs finite a ≤ b and step > 0");
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        if n > 100_000 {
            bail!("--ts describes {n} values");
        }
        Ok((0..n).map(|k| start + k as f64 * step).collect())
    }
}

pub fn parse_point(s: &str) -> Result<[f64; 3]> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>()).collect::<Result<_, _>>().context("point expects x,y,z")?;
    match v[..] {
        [x, y, z] if v.iter().all(|c| c.is_finite()) => Ok([x, y, z]),
        _ => bail!("point expects three finite numbers x,y,z"),
    }
}

/// Everything a run needs; unset fields take per-subcommand defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub subcommand: Option<String>,
    pub ckf: Option<CkfArg>,
    pub potential: Option<PotentialArg>,
    pub seed_points: Option<Vec<[f64; 3]>>,
    pub points: Option<usize>,
    pub tolerance: Option<f64>,
    pub t_max: Option<f64>,
    pub rk_tol: Option<f64>,
    pub grid: Option<GridArg>,
    pub stencil: Option<usize>,
    pub ts: Option<TsRange>,
    pub tol: Option<f64>,
    pub quadrature: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

impl RunConfig {
    /// Reads a config file; a run manifest is accepted too.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("{} is not JSON", path.display()))?;
        if value.get("version").is_some() {
            if let Some(inner) = value.get_mut("config") {
                let inner = inner.take();
                value = inner;
            }
        }
        serde_json::from_value(value).with_context(|| format!("{} is not a valid RunConfig", path.display()))
    }

    /// `other`'s set fields win.
    pub fn overridden_by(self, other: RunConfig) -> RunConfig {
        macro_rules! pick {
            ($($f:ident),*) => { RunConfig { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(subcommand, ckf, potential, seed_points, points, tolerance, t_max, rk_tol, grid, stencil, ts, tol, quadrature, out, seed, threads)
    }
}

/// A fully resolved configuration, as echoed in the manifest.
#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    pub subcommand: String,
    pub ckf: CkfParams,
    pub potential: Option<PotentialSpec>,
    pub seed_points: Vec<[f64; 3]>,
    pub points: usize,
    pub tolerance: f64,
    pub t_max: f64,
    pub rk_tol: f64,
    pub grid: GridArg,
    pub stencil: usize,
    pub ts: TsRange,
    pub tol: f64,
    pub quadrature: Option<usize>,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: usize,
}

pub const SUBCOMMANDS: [&str; 8] =
    ["classify", "verify-identities", "field-lines", "loop-integrals", "verify-operators", "holonomy", "spectrum-sweep", "control-losyau"];

impl Resolved {
    pub fn grid_spec(&self) -> Result<GridSpec> {
        Ok(GridSpec::new(self.grid.l, self.grid.n, Stencil::from_order(self.stencil)?)?)
    }
}

pub fn resolve(cfg: RunConfig) -> Result<Resolved> {
    let sub = cfg.subcommand.clone().context("no subcommand given")?;
    if !SUBCOMMANDS.contains(&sub.as_str()) {
        bail!("unknown subcommand `{sub}`");
    }
    let losyau = sub == "control-losyau";

    let mut potential = cfg.potential.as_ref().map(PotentialArg::resolve).transpose()?;
    if losyau {
        potential = Some(PotentialSpec::LossYau);
    }
    let ckf = match (&cfg.ckf, &potential) {
        _ if losyau => CkfParams::isoclinic(),
        (Some(c), _) => c.resolve()?,
        (None, Some(spec)) => spec.parent().context("--ckf is required: the potential has no parent field")?,
        (None, None) => bail!("--ckf is required"),
    };
    if potential.is_none() && matches!(sub.as_str(), "verify-operators" | "holonomy" | "spectrum-sweep") {
        potential = Some(cfg.ckf.as_ref().and_then(CkfArg::default_potential).unwrap_or(PotentialSpec::Zero));
    }

    let tolerance = cfg.tolerance.unwrap_or(match sub.as_str() {
        "loop-integrals" => 1e-7,
        "verify-operators" => 1e-9,
        "holonomy" => 1e-6,
        _ => 1e-10,
    });
    let points = cfg.points.unwrap_or(match sub.as_str() {
        "verify-operators" => 200,
        "control-losyau" => 1000,
        _ => 100,
    });
    let threads = match cfg.threads {
        Some(0) => bail!("--threads must be positive"),
        Some(t) => t,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let out = match cfg.out {
        Some(o) => o,
        None => std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
    };
    let r = Resolved {
        subcommand: sub,
        ckf,
        potential,
        seed_points: cfg.seed_points.unwrap_or_else(|| vec![[0.5, 0.0, 0.3]]),
        points,
        tolerance,
        t_max: cfg.t_max.unwrap_or(50.0),
        rk_tol: cfg.rk_tol.unwrap_or(1e-12),
        grid: cfg.grid.unwrap_or(GridArg { n: 24, l: 6.0 }),
        stencil: cfg.stencil.unwrap_or(4),
        ts: cfg.ts.unwrap_or(TsRange { start: 0.0, stop: 20.0, step: 1.0 }),
        tol: cfg.tol.unwrap_or(if losyau { 1e-6 } else { 1e-5 }),
        quadrature: cfg.quadrature,
        out,
        seed: cfg.seed.unwrap_or(7),
        threads,
    };
    for (name, v) in [("tolerance", r.tolerance), ("t_max", r.t_max), ("rk_tol", r.rk_tol), ("tol", r.tol)] {
        if !(v > 0.0 && v.is_finite()) {
            bail!("{name} must be positive and finite, got {v}");
        }
    }
    if r.points == 0 || r.seed_points.is_empty() {
        bail!("need at least one sample point");
    }
    if matches!(r.subcommand.as_str(), "spectrum-sweep" | "control-losyau") {
        r.grid_spec()?;
        r.ts.values()?;
    }
    Ok(r)
}
