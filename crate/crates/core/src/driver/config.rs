//! Flat `key = value` configuration with optional `[section]` headers.
//!
//! Numbers may be written as decimals or as rationals `p/q` (bare or quoted),
//! so `beta1 = 5/12` is exact to rounding. Keys are `section.name`; a bare
//! `name` is accepted when it identifies exactly one key.

use std::path::PathBuf;

use super::SimConfig;
use crate::error::{Error, Result};
use crate::fem::MassKind;
use crate::timestep::KineticsMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfigKey {
    pub name: &'static str,
    pub help: &'static str,
}

const fn key(name: &'static str, help: &'static str) -> ConfigKey {
    ConfigKey { name, help }
}

pub const KEYS: &[ConfigKey] = &[
    key("kinetics.a", "kinetic constant a (default 0.1)"),
    key("kinetics.b", "kinetic constant b (default 0.9)"),
    key("kinetics.gamma", "sets gamma_bulk and gamma_surf together"),
    key("kinetics.gamma_bulk", "bulk reaction scale (default 500)"),
    key("kinetics.gamma_surf", "surface reaction scale (default 500)"),
    key("coupling.alpha1", "exchange h1: coefficient of r (default 5/12)"),
    key("coupling.alpha2", "exchange h2: coefficient of s (default 5)"),
    key("coupling.beta1", "exchange h1: coefficient of u (default 5/12)"),
    key("coupling.beta2", "exchange h2: coefficient of u (default 0)"),
    key("coupling.kappa1", "exchange h1: coefficient of v (default 0)"),
    key("coupling.kappa2", "exchange h2: coefficient of v (default 5)"),
    key("diffusion.d_bulk", "bulk diffusion ratio (default 1)"),
    key("diffusion.d_surf", "surface diffusion ratio (default 1)"),
    key("mesh.level", "ball mesh refinement level, at most 7 (default 3)"),
    key("scheme.dt", "time step (default 1e-4)"),
    key("scheme.theta", "fractional-step parameter in (0, 1/2) (default 1 - 1/sqrt 2)"),
    key("scheme.alpha", "implicitness weight in (1/2, 1] (default 2 - sqrt 2)"),
    key("scheme.newton_tol", "Newton tolerance on the scaled residual (default 1e-8)"),
    key("scheme.newton_max", "Newton iteration cap (default 20)"),
    key("scheme.linear_tol", "relative residual of linear solves (default 1e-10)"),
    key("scheme.max_halvings", "step halvings allowed on solver failure (default 10)"),
    key("scheme.mass", "consistent | lumped (default consistent)"),
    key("scheme.kinetics", "full | linearized | off (default full)"),
    key("run.t_end", "end time (default 2)"),
    key("run.snapshot_interval", "time between VTK snapshots, 0 = none (default 0)"),
    key("run.seed", "random seed of the initial perturbation (default 1)"),
    key("run.epsilon_ic", "relative perturbation amplitude (default 0.01)"),
    key("run.output_dir", "directory for snapshots and the time series"),
    key("run.early_stop_tol", "relative metric change for early stop, 0 = off (default 1e-6)"),
    key("run.early_stop_window", "steps over which the change is measured (default 100)"),
    key("verdict.threshold", "relative deviation counted as a pattern (default 0.05)"),
    key("verdict.layer_ratio", "outer/inner shell ratio of a boundary layer (default 5)"),
    key("verdict.surface_ratio", "surface/threshold ratio needed next to a bulk pattern (default 5)"),
    key("verdict.outer_radius", "outer shell starts here (default 0.8)"),
    key("verdict.inner_radius", "inner core ends here (default 0.5)"),
];

pub fn config_keys() -> &'static [ConfigKey] {
    KEYS
}

/// Full key name for `name`, which may omit the section.
pub fn resolve_key(name: &str) -> Option<&'static str> {
    if let Some(k) = KEYS.iter().find(|k| k.name == name) {
        return Some(k.name);
    }
    let mut hits = KEYS
        .iter()
        .filter(|k| k.name.rsplit('.').next() == Some(name));
    match (hits.next(), hits.next()) {
        (Some(k), None) => Some(k.name),
        _ => None,
    }
}

fn unquote(v: &str) -> Option<&str> {
    for q in ['"', '\''] {
        if let Some(inner) = v.strip_prefix(q) {
            return inner.strip_suffix(q);
        }
    }
    None
}

/// Decimal or rational `p/q` literal, optionally quoted.
pub fn parse_number(v: &str) -> std::result::Result<f64, String> {
    let v = unquote(v).unwrap_or(v).trim();
    let parse = |s: &str| {
        s.trim()
            .replace('_', "")
            .parse::<f64>()
            .map_err(|_| format!("`{v}` is not a number"))
    };
    let x = match v.split_once('/') {
        Some((p, q)) => {
            let (p, q) = (parse(p)?, parse(q)?);
            if q == 0.0 {
                return Err(format!("`{v}` divides by zero"));
            }
            p / q
        }
        None => parse(v)?,
    };
    if !x.is_finite() {
        return Err(format!("`{v}` is not finite"));
    }
    Ok(x)
}

fn parse_count(v: &str) -> std::result::Result<u64, String> {
    let v = unquote(v).unwrap_or(v).trim();
    v.replace('_', "")
        .parse::<u64>()
        .map_err(|_| format!("`{v}` is not a non-negative integer"))
}

fn parse_word(v: &str) -> String {
    unquote(v).unwrap_or(v).trim().to_ascii_lowercase()
}

/// Sets one key on `cfg`. `key` must be a resolved full name.
fn apply(cfg: &mut SimConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    let p = &mut cfg.params;
    let num = || parse_number(value);
    match key {
        "kinetics.a" => p.kinetics.a = num()?,
        "kinetics.b" => p.kinetics.b = num()?,
        "kinetics.gamma" => {
            let g = num()?;
            p.kinetics.gamma_bulk = g;
            p.kinetics.gamma_surf = g;
        }
        "kinetics.gamma_bulk" => p.kinetics.gamma_bulk = num()?,
        "kinetics.gamma_surf" => p.kinetics.gamma_surf = num()?,
        "coupling.alpha1" => p.coupling.alpha1 = num()?,
        "coupling.alpha2" => p.coupling.alpha2 = num()?,
        "coupling.beta1" => p.coupling.beta1 = num()?,
        "coupling.beta2" => p.coupling.beta2 = num()?,
        "coupling.kappa1" => p.coupling.kappa1 = num()?,
        "coupling.kappa2" => p.coupling.kappa2 = num()?,
        "diffusion.d_bulk" => p.diffusion.d_bulk = num()?,
        "diffusion.d_surf" => p.diffusion.d_surf = num()?,
        "mesh.level" => cfg.level = parse_count(value)? as usize,
        "scheme.dt" => cfg.scheme.dt = num()?,
        "scheme.theta" => cfg.scheme.theta = num()?,
        "scheme.alpha" => cfg.scheme.alpha = num()?,
        "scheme.newton_tol" => cfg.scheme.newton_tol = num()?,
        "scheme.newton_max" => cfg.scheme.newton_max = parse_count(value)? as usize,
        "scheme.linear_tol" => cfg.scheme.linear_tol = num()?,
        "scheme.max_halvings" => {
            cfg.scheme.max_halvings = u32::try_from(parse_count(value)?)
                .map_err(|_| format!("`{value}` is too large"))?
        }
        "scheme.mass" => {
            cfg.mass = match parse_word(value).as_str() {
                "consistent" => MassKind::Consistent,
                "lumped" => MassKind::Lumped,
                other => return Err(format!("`{other}` is not one of consistent, lumped")),
            }
        }
        "scheme.kinetics" => {
            cfg.kinetics = match parse_word(value).as_str() {
                "full" => KineticsMode::Full,
                "linearized" => KineticsMode::Linearized,
                "off" => KineticsMode::Off,
                other => return Err(format!("`{other}` is not one of full, linearized, off")),
            }
        }
        "run.t_end" => cfg.t_end = num()?,
        "run.snapshot_interval" => cfg.snapshot_interval = num()?,
        "run.seed" => cfg.seed = parse_count(value)?,
        "run.epsilon_ic" => cfg.epsilon_ic = num()?,
        "run.output_dir" => {
            let s = unquote(value).unwrap_or(value).trim();
            cfg.output_dir = (!s.is_empty()).then(|| PathBuf::from(s));
        }
        "run.early_stop_tol" => cfg.early_stop_tol = num()?,
        "run.early_stop_window" => cfg.early_stop_window = parse_count(value)? as usize,
        "verdict.threshold" => cfg.verdict.threshold = num()?,
        "verdict.layer_ratio" => cfg.verdict.layer_ratio = num()?,
        "verdict.surface_ratio" => cfg.verdict.surface_ratio = num()?,
        "verdict.outer_radius" => cfg.verdict.outer_radius = num()?,
        "verdict.inner_radius" => cfg.verdict.inner_radius = num()?,
        _ => unreachable!("unresolved key {key}"),
    }
    Ok(())
}

fn strip_comment(line: &str) -> &str {
    let mut quote = None;
    for (i, c) in line.char_indices() {
        match (quote, c) {
            (None, '"' | '\'') => quote = Some(c),
            (Some(q), _) if c == q => quote = None,
            (None, '#') => return &line[..i],
            _ => {}
        }
    }
    line
}

/// Splits `KEY=VALUE` from the command line.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(Error::Parse(format!("override `{s}` is not KEY=VALUE"))),
    }
}

/// Builds a configuration from defaults, then the file text, then the
/// overrides, in that order of precedence (later wins).
pub fn parse_config(text: &str, overrides: &[(String, String)]) -> Result<SimConfig> {
    let mut cfg = SimConfig::default();
    let mut section = String::new();
    let mut seen: Vec<&'static str> = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = no + 1;
        let l = strip_comment(raw).trim();
        if l.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Config { line, msg };
        if let Some(rest) = l.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(format!("malformed section header `{l}`")))?
                .trim();
            if !KEYS.iter().any(|k| k.name.starts_with(&format!("{name}."))) {
                return Err(err(format!("unknown section `[{name}]`")));
            }
            section = name.to_string();
            continue;
        }
        let (k, v) = l
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got `{l}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if v.is_empty() {
            return Err(err(format!("missing value for `{k}`")));
        }
        let full = if section.is_empty() {
            resolve_key(k)
        } else {
            KEYS.iter()
                .find(|c| c.name == format!("{section}.{k}"))
                .map(|c| c.name)
        }
        .ok_or_else(|| err(format!("unknown key `{k}`")))?;
        if seen.contains(&full) {
            return Err(err(format!("duplicate key `{full}`")));
        }
        seen.push(full);
        apply(&mut cfg, full, v).map_err(|m| err(format!("{full}: {m}")))?;
    }
    for (k, v) in overrides {
        let full = resolve_key(k).ok_or_else(|| Error::UnknownKey(k.clone()))?;
        apply(&mut cfg, full, v).map_err(|m| Error::Parse(format!("override {full}: {m}")))?;
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::ModelParams;

    const TABLE1: &str = r#"
# default parameters
[kinetics]
a = 0.1
b = 0.9
gamma = 500

[coupling]
alpha1 = 5/12
beta1 = "5/12"
alpha2 = 5
kappa2 = 5
beta2 = 0
kappa1 = 0

[diffusion]
d_bulk = 1
d_surf = 20   # surface ratio
"#;

    #[test]
    fn reference_is_exact() {
        let cfg = parse_config(TABLE1, &[]).unwrap();
        assert_eq!(cfg.params, ModelParams::reference(1.0, 20.0));
        assert_eq!(cfg.params.coupling.alpha1, 5.0 / 12.0);
        cfg.validate().unwrap();
    }

    #[test]
    fn overrides_take_precedence() {
        let o = vec![
            parse_override("d_surf=1").unwrap(),
            parse_override("run.seed = 42").unwrap(),
            parse_override("scheme.mass=lumped").unwrap(),
        ];
        let cfg = parse_config(TABLE1, &o).unwrap();
        assert_eq!(cfg.params.diffusion.d_surf, 1.0);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.mass, MassKind::Lumped);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse_config("a = 0.1\nb = zero\n", &[]) {
            Err(Error::Config { line, msg }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("kinetics.b"));
            }
            other => panic!("{other:?}"),
        }
        match parse_config("\n\nfoo = 1\n", &[]) {
            Err(Error::Config { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("foo"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config("a = 1\na = 2", &[]), Err(Error::Config { line: 2, .. })));
        assert!(matches!(parse_config("[nope]", &[]), Err(Error::Config { line: 1, .. })));
        assert!(matches!(parse_config("a 1", &[]), Err(Error::Config { line: 1, .. })));
        assert!(matches!(
            parse_config("", &[("bogus".into(), "1".into())]),
            Err(Error::UnknownKey(k)) if k == "bogus"
        ));
    }

    #[test]
    fn numbers() {
        assert_eq!(parse_number("5/12").unwrap(), 5.0 / 12.0);
        assert_eq!(parse_number("-1/4").unwrap(), -0.25);
        assert_eq!(parse_number("'1e-3'").unwrap(), 1e-3);
        assert!(parse_number("1/0").is_err());
        assert!(parse_number("inf").is_err());
    }

    #[test]
    fn bare_names_must_be_unique() {
        assert_eq!(resolve_key("alpha"), Some("scheme.alpha"));
        assert_eq!(resolve_key("alpha1"), Some("coupling.alpha1"));
        assert_eq!(resolve_key("kinetics"), Some("scheme.kinetics"));
        assert_eq!(resolve_key("nothing"), None);
    }

    #[test]
    fn zero_gamma_is_rejected_on_validation() {
        let cfg = parse_config("gamma = 0", &[]).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn every_key_is_settable() {
        for k in KEYS {
            let v = match k.name {
                "scheme.mass" => "lumped",
                "scheme.kinetics" => "off",
                "run.output_dir" => "out",
                _ => "1",
            };
            let mut cfg = SimConfig::default();
            apply(&mut cfg, k.name, v).unwrap();
        }
    }
}
