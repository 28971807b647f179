//! Run configuration, assembled from a preset, an optional `key=value` file
//! and command-line flags. Flags win over the file, the file over the preset.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;
use wavepacket_core::oracle::GridSpec;
use wavepacket_core::{Barrier, Packet, PoleSelection, Preset, TermSelector};

/// Highest accepted `--n-corrections`.
pub const MAX_CORRECTION_TERMS: usize = 16;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("cannot read config file {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid { field: field.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format '{other}' (expected csv or json)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

/// How many resonance poles to extract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoleCount {
    /// Poles within six momentum widths of the packet.
    Auto,
    /// Every pole of the table.
    All,
    /// The first `k` seeds on the positive-momentum side.
    Seeds(usize),
}

impl FromStr for PoleCount {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(PoleCount::Auto),
            "all" => Ok(PoleCount::All),
            n => n.parse().map(PoleCount::Seeds).map_err(|_| format!("expected 'auto', 'all' or a count, got '{n}'")),
        }
    }
}

impl fmt::Display for PoleCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PoleCount::Auto => f.write_str("auto"),
            PoleCount::All => f.write_str("all"),
            PoleCount::Seeds(k) => write!(f, "{k}"),
        }
    }
}

/// Every setting that a preset, a config file or a flag can provide.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub preset: Option<Preset>,
    pub v0: Option<f64>,
    pub d: Option<f64>,
    pub m: Option<f64>,
    pub hbar: Option<f64>,
    pub xc: Option<f64>,
    pub pc: Option<f64>,
    pub deltax: Option<f64>,
    pub t: Option<f64>,
    pub p_lo: Option<f64>,
    pub p_hi: Option<f64>,
    pub n_points: Option<usize>,
    pub n_poles: Option<PoleCount>,
    pub n_corrections: Option<usize>,
    pub breakdown: Option<bool>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub n_max: Option<usize>,
    pub half_width: Option<f64>,
    pub n_x: Option<usize>,
    pub n_t: Option<usize>,
    pub cache_dir: Option<PathBuf>,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::invalid(key, format!("cannot parse '{value}': {e}")))
}

impl Settings {
    /// Parses `key = value` lines. Blank lines and `#` comments are skipped.
    /// Keys are the flag names; `_` may stand for `-`.
    pub fn parse_config(text: &str) -> Result<Self, ConfigError> {
        let mut s = Settings::default();
        for (number, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::invalid(
                    format!("line {}", number + 1),
                    format!("expected key=value, got '{line}'"),
                ));
            };
            s.set(&key.trim().replace('_', "-"), value.trim())?;
        }
        Ok(s)
    }

    pub fn read_config(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::parse_config(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "preset" => {
                self.preset = Some(Preset::from_name(value).ok_or_else(|| {
                    ConfigError::invalid("preset", format!("unknown preset '{value}' (expected fig1, fig2 or fig3)"))
                })?)
            }
            "V0" | "v0" => self.v0 = Some(parse_value(key, value)?),
            "d" => self.d = Some(parse_value(key, value)?),
            "m" => self.m = Some(parse_value(key, value)?),
            "hbar" => self.hbar = Some(parse_value(key, value)?),
            "xc" => self.xc = Some(parse_value(key, value)?),
            "pc" => self.pc = Some(parse_value(key, value)?),
            "deltax" => self.deltax = Some(parse_value(key, value)?),
            "t" => self.t = Some(parse_value(key, value)?),
            "p-lo" => self.p_lo = Some(parse_value(key, value)?),
            "p-hi" => self.p_hi = Some(parse_value(key, value)?),
            "n-points" => self.n_points = Some(parse_value(key, value)?),
            "n-poles" => self.n_poles = Some(parse_value(key, value)?),
            "n-corrections" => self.n_corrections = Some(parse_value(key, value)?),
            "breakdown" => self.breakdown = Some(parse_value(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = Some(parse_value(key, value)?),
            "n-max" => self.n_max = Some(parse_value(key, value)?),
            "half-width" => self.half_width = Some(parse_value(key, value)?),
            "n-x" => self.n_x = Some(parse_value(key, value)?),
            "n-t" => self.n_t = Some(parse_value(key, value)?),
            "cache-dir" => self.cache_dir = Some(PathBuf::from(value)),
            other => return Err(ConfigError::invalid(other, "unknown configuration key")),
        }
        Ok(())
    }

    /// Fills every unset field from `lower`.
    pub fn over(self, lower: Settings) -> Settings {
        Settings {
            preset: self.preset.or(lower.preset),
            v0: self.v0.or(lower.v0),
            d: self.d.or(lower.d),
            m: self.m.or(lower.m),
            hbar: self.hbar.or(lower.hbar),
            xc: self.xc.or(lower.xc),
            pc: self.pc.or(lower.pc),
            deltax: self.deltax.or(lower.deltax),
            t: self.t.or(lower.t),
            p_lo: self.p_lo.or(lower.p_lo),
            p_hi: self.p_hi.or(lower.p_hi),
            n_points: self.n_points.or(lower.n_points),
            n_poles: self.n_poles.or(lower.n_poles),
            n_corrections: self.n_corrections.or(lower.n_corrections),
            breakdown: self.breakdown.or(lower.breakdown),
            out: self.out.or(lower.out),
            format: self.format.or(lower.format),
            n_max: self.n_max.or(lower.n_max),
            half_width: self.half_width.or(lower.half_width),
            n_x: self.n_x.or(lower.n_x),
            n_t: self.n_t.or(lower.n_t),
            cache_dir: self.cache_dir.or(lower.cache_dir),
        }
    }

    /// Layers `self` (flags) over the config file, if any, then over the
    /// preset named by either of them (default `fig1`).
    pub fn layered(self, config: Option<&Path>) -> Result<Settings, ConfigError> {
        self.layered_with(config, Settings::default())
    }

    /// As [`Settings::layered`], with command defaults between the config
    /// file and the preset.
    pub fn layered_with(self, config: Option<&Path>, defaults: Settings) -> Result<Settings, ConfigError> {
        let file = match config {
            Some(path) => Settings::read_config(path)?,
            None => Settings::default(),
        };
        let merged = self.over(file);
        let preset = merged.preset.unwrap_or(Preset::Fig1);
        Ok(Settings { preset: Some(preset), ..merged }.over(defaults).over(preset_settings(preset)))
    }
}

/// Parameter values of a preset.
pub fn preset_settings(preset: Preset) -> Settings {
    let s = preset.scenario();
    let (p_lo, p_hi, n_points) = preset.window();
    Settings {
        preset: Some(preset),
        v0: Some(s.barrier.v0),
        d: Some(s.barrier.d),
        m: Some(s.barrier.m),
        hbar: Some(s.barrier.hbar),
        xc: Some(s.packet.xc),
        pc: Some(s.packet.pc),
        deltax: Some(s.packet.delta_x),
        t: Some(s.t),
        p_lo: Some(p_lo),
        p_hi: Some(p_hi),
        n_points: Some(n_points),
        ..Settings::default()
    }
}

/// A fully resolved and validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    pub barrier: Barrier,
    pub packet: Packet,
    pub t: f64,
    pub p_lo: f64,
    pub p_hi: f64,
    pub n_points: usize,
    pub n_poles: PoleCount,
    pub n_corrections: usize,
    pub breakdown: bool,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    /// Resolves layered settings; every missing value must have come from
    /// the preset.
    pub fn from_settings(s: &Settings) -> Result<Self, ConfigError> {
        let need = |v: Option<f64>, field: &str| v.ok_or_else(|| ConfigError::invalid(field, "missing value"));
        let barrier =
            Barrier { v0: need(s.v0, "V0")?, d: need(s.d, "d")?, m: need(s.m, "m")?, hbar: need(s.hbar, "hbar")? };
        barrier.validate().map_err(|e| match e {
            wavepacket_core::StationaryError::InvalidParameter { field, value } => {
                ConfigError::invalid(field, format!("must be finite and positive, got {value}"))
            }
            other => ConfigError::invalid("barrier", other.to_string()),
        })?;
        let packet = Packet { xc: need(s.xc, "xc")?, pc: need(s.pc, "pc")?, delta_x: need(s.deltax, "deltax")? };
        packet.validate().map_err(|e| match e {
            wavepacket_core::PropagatorError::InvalidPacket { field, value } => {
                ConfigError::invalid(field, format!("invalid value {value}"))
            }
            other => ConfigError::invalid("packet", other.to_string()),
        })?;
        if packet.pc == 0.0 {
            return Err(ConfigError::invalid("pc", "the packet must move (pc != 0)"));
        }
        let t = need(s.t, "t")?;
        if !(t.is_finite() && t >= 0.0) {
            return Err(ConfigError::invalid("t", format!("must be finite and nonnegative, got {t}")));
        }
        let p_lo = need(s.p_lo, "p-lo")?;
        let p_hi = need(s.p_hi, "p-hi")?;
        if !(p_lo.is_finite() && p_hi.is_finite() && p_lo < p_hi) {
            return Err(ConfigError::invalid("p-lo", format!("window [{p_lo}, {p_hi}] must satisfy p-lo < p-hi")));
        }
        let n_points = s.n_points.ok_or_else(|| ConfigError::invalid("n-points", "missing value"))?;
        if n_points < 2 {
            return Err(ConfigError::invalid("n-points", format!("must be at least 2, got {n_points}")));
        }
        let n_corrections = s.n_corrections.unwrap_or(3);
        if n_corrections > MAX_CORRECTION_TERMS {
            return Err(ConfigError::invalid(
                "n-corrections",
                format!("at most {MAX_CORRECTION_TERMS} correction terms are supported, got {n_corrections}"),
            ));
        }
        let config = RunConfig {
            preset: s.preset.unwrap_or(Preset::Fig1),
            barrier,
            packet,
            t,
            p_lo,
            p_hi,
            n_points,
            n_poles: s.n_poles.unwrap_or(PoleCount::Auto),
            n_corrections,
            breakdown: s.breakdown.unwrap_or(false),
            out: s.out.clone(),
            format: s.format.unwrap_or(Format::Csv),
        };
        Ok(config)
    }

    /// The evaluation grid, which must avoid `p = 0`.
    pub fn checked_momenta(&self) -> Result<Vec<f64>, ConfigError> {
        let ps = self.momenta();
        if ps.contains(&0.0) {
            return Err(ConfigError::invalid(
                "n-points",
                "the momentum grid hits p = 0, where psi is not evaluated; change n-points or the window",
            ));
        }
        Ok(ps)
    }

    /// `n_points` equally spaced momenta including both window ends.
    pub fn momenta(&self) -> Vec<f64> {
        let step = (self.p_hi - self.p_lo) / (self.n_points - 1) as f64;
        (0..self.n_points)
            .map(|k| if k + 1 == self.n_points { self.p_hi } else { self.p_lo + k as f64 * step })
            .collect()
    }

    pub fn pole_selection(&self) -> PoleSelection {
        match self.n_poles {
            PoleCount::Auto => TermSelector::default_for(&self.packet, self.barrier.hbar).poles,
            PoleCount::All => PoleSelection::All,
            PoleCount::Seeds(0) => PoleSelection::None,
            PoleCount::Seeds(k) => PoleSelection::Seeds(k),
        }
    }

    /// All structural terms with the configured poles and corrections.
    pub fn selector(&self) -> TermSelector {
        TermSelector {
            poles: self.pole_selection(),
            corrections: self.n_corrections.checked_sub(1),
            ..TermSelector::exact()
        }
    }

    /// `key=value` pairs describing the run, in a fixed order.
    pub fn provenance(&self) -> Vec<(&'static str, String)> {
        vec![
            ("preset", self.preset.name().to_string()),
            ("V0", self.barrier.v0.to_string()),
            ("d", self.barrier.d.to_string()),
            ("m", self.barrier.m.to_string()),
            ("hbar", self.barrier.hbar.to_string()),
            ("xc", self.packet.xc.to_string()),
            ("pc", self.packet.pc.to_string()),
            ("deltax", self.packet.delta_x.to_string()),
            ("t", self.t.to_string()),
            ("p-lo", self.p_lo.to_string()),
            ("p-hi", self.p_hi.to_string()),
            ("n-points", self.n_points.to_string()),
            ("n-poles", self.n_poles.to_string()),
            ("n-corrections", self.n_corrections.to_string()),
        ]
    }
}

/// Crank-Nicolson grid settings of `compare`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSettings {
    pub half_width: f64,
    pub n_x: usize,
    pub n_t: usize,
}

impl OracleSettings {
    pub const DEFAULT: OracleSettings = OracleSettings { half_width: 160.0, n_x: 1 << 18, n_t: 250 };

    pub fn from_settings(s: &Settings) -> Result<Self, ConfigError> {
        let o = OracleSettings {
            half_width: s.half_width.unwrap_or(Self::DEFAULT.half_width),
            n_x: s.n_x.unwrap_or(Self::DEFAULT.n_x),
            n_t: s.n_t.unwrap_or(Self::DEFAULT.n_t),
        };
        if !(o.half_width.is_finite() && o.half_width > 0.0) {
            return Err(ConfigError::invalid("half-width", format!("must be positive, got {}", o.half_width)));
        }
        if o.n_t == 0 {
            return Err(ConfigError::invalid("n-t", "must be at least 1"));
        }
        Ok(o)
    }

    pub fn grid(&self, barrier: &Barrier, t: f64) -> GridSpec {
        GridSpec::aligned(barrier, self.half_width, self.n_x, t, self.n_t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_preset() {
        let file = Settings::parse_config("preset = fig2\nV0 = 300\nt=1.5 # comment\n\n").unwrap();
        let flags = Settings { t: Some(2.0), ..Settings::default() };
        let preset = file.preset.unwrap();
        let s = flags.over(file).over(preset_settings(preset));
        assert_eq!(s.t, Some(2.0));
        assert_eq!(s.v0, Some(300.0));
        assert_eq!(s.d, Some(3.0));
    }

    #[test]
    fn default_preset_is_fig1() {
        let s = Settings::default().layered(None).unwrap();
        let c = RunConfig::from_settings(&s).unwrap();
        assert_eq!(c.preset, Preset::Fig1);
        assert_eq!((c.barrier.v0, c.barrier.d, c.t), (188.0, 2.5, 5.0));
        assert_eq!(c.momenta().len(), 801);
        assert_eq!(*c.momenta().last().unwrap(), 24.0);
    }

    #[test]
    fn config_keys_accept_underscores() {
        let s = Settings::parse_config("p_lo=-3\nn_points=10\nn-poles=all\nformat=json").unwrap();
        assert_eq!(s.p_lo, Some(-3.0));
        assert_eq!(s.n_points, Some(10));
        assert_eq!(s.n_poles, Some(PoleCount::All));
        assert_eq!(s.format, Some(Format::Json));
    }

    #[test]
    fn errors_name_the_field() {
        let err = Settings::parse_config("wobble=1").unwrap_err();
        assert!(err.to_string().starts_with("wobble:"));
        let err = Settings::parse_config("d=abc").unwrap_err();
        assert!(err.to_string().starts_with("d:"));
        let bad = Settings { d: Some(-1.0), ..Settings::default() }.layered(None).unwrap();
        assert!(RunConfig::from_settings(&bad).unwrap_err().to_string().starts_with("d:"));
        let bad = Settings { p_lo: Some(5.0), p_hi: Some(1.0), ..Settings::default() }.layered(None).unwrap();
        assert!(RunConfig::from_settings(&bad).unwrap_err().to_string().starts_with("p-lo:"));
        let bad = Settings { n_points: Some(1), ..Settings::default() }.layered(None).unwrap();
        assert!(RunConfig::from_settings(&bad).unwrap_err().to_string().starts_with("n-points:"));
    }

    #[test]
    fn grid_through_zero_is_rejected() {
        let s = Settings { p_lo: Some(-1.0), p_hi: Some(1.0), n_points: Some(3), ..Settings::default() };
        let err = RunConfig::from_settings(&s.layered(None).unwrap()).unwrap().checked_momenta().unwrap_err();
        assert!(err.to_string().starts_with("n-points:"));
    }

    #[test]
    fn correction_count_maps_to_orders() {
        let s = Settings { n_corrections: Some(1), n_poles: Some(PoleCount::Seeds(3)), ..Settings::default() };
        let c = RunConfig::from_settings(&s.layered(None).unwrap()).unwrap();
        assert_eq!(c.selector().corrections, Some(0));
        assert_eq!(c.selector().poles, PoleSelection::Seeds(3));
        let s = Settings { n_corrections: Some(0), ..Settings::default() };
        let c = RunConfig::from_settings(&s.layered(None).unwrap()).unwrap();
        assert_eq!(c.selector().corrections, None);
    }
}
