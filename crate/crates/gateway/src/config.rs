//! Gateway configuration: defaults, an optional JSON file named by
//! `HURO_TELEOP_CONFIG`, and command-line flags, in increasing precedence.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::Parser;
use huro_teleop::camera::RenderConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CONFIG_ENV: &str = "HURO_TELEOP_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub host: String,
    pub port: u16,
    /// Course file; the built-in empty 3 m × 6 m course when absent.
    pub course_path: Option<PathBuf>,
    pub tick_hz: u32,
    pub render: RenderConfig,
    pub static_dir: PathBuf,
    /// Publishers subscribed to their own topic receive their own messages.
    pub self_echo: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            host: "0.0.0.0".into(),
            port: 9090,
            course_path: None,
            tick_hz: 20,
            render: RenderConfig::default(),
            static_dir: PathBuf::from("static"),
            self_echo: true,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("unknown flag {0}")]
    UnknownFlag(String),
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("cannot read config file {path}: {reason}")]
    File { path: String, reason: String },
    /// `--help` or `--version`; carries the text to print.
    #[error("{0}")]
    Help(String),
}

impl ConfigError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            ConfigError::Help(_) => 0,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "huro-teleop", version, about = "Teleoperation gateway for a simulated kid-size humanoid")]
struct Cli {
    /// Bind address.
    #[arg(long)]
    host: Option<String>,
    /// TCP port for HTTP and WebSocket traffic.
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    port: Option<u16>,
    /// Course JSON file.
    #[arg(long)]
    course: Option<PathBuf>,
    /// Simulation ticks per second (state publish rate).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=100))]
    tick_hz: Option<u32>,
    #[arg(long, value_parser = clap::value_parser!(u32).range(32..))]
    cam_width: Option<u32>,
    #[arg(long, value_parser = clap::value_parser!(u32).range(24..))]
    cam_height: Option<u32>,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=30))]
    cam_fps: Option<u32>,
    /// Directory served under /static (operator console assets).
    #[arg(long)]
    static_dir: Option<PathBuf>,
}

impl Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.port == 0 {
            return Err(ConfigError::InvalidValue("port must lie in [1, 65535]".into()));
        }
        if !(1..=100).contains(&self.tick_hz) {
            return Err(ConfigError::InvalidValue(format!(
                "tick_hz {} must lie in [1, 100]",
                self.tick_hz
            )));
        }
        self.render.validate().map_err(ConfigError::InvalidValue)
    }

    pub fn from_file(path: &Path) -> Result<Config, ConfigError> {
        let file_err = |reason: String| ConfigError::File {
            path: path.display().to_string(),
            reason,
        };
        let bytes = std::fs::read(path).map_err(|e| file_err(e.to_string()))?;
        serde_json::from_slice(&bytes).map_err(|e| file_err(e.to_string()))
    }
}

/// Builds the configuration from `args` (including the program name) with
/// an optional config file as the base layer.
pub fn parse_cli_with<I, T>(args: I, config_file: Option<&Path>) -> Result<Config, ConfigError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| match e.kind() {
        ErrorKind::UnknownArgument => {
            let flag = e
                .get(clap::error::ContextKind::InvalidArg)
                .map(|v| v.to_string())
                .unwrap_or_default();
            ConfigError::UnknownFlag(flag)
        }
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ConfigError::Help(e.to_string()),
        _ => ConfigError::InvalidValue(e.to_string().trim().to_string()),
    })?;

    let mut config = match config_file {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    if let Some(host) = cli.host {
        config.host = host;
    }
    if let Some(port) = cli.port {
        config.port = port;
    }
    if let Some(course) = cli.course {
        config.course_path = Some(course);
    }
    if let Some(hz) = cli.tick_hz {
        config.tick_hz = hz;
    }
    if let Some(w) = cli.cam_width {
        config.render.width = w;
    }
    if let Some(h) = cli.cam_height {
        config.render.height = h;
    }
    if let Some(fps) = cli.cam_fps {
        config.render.fps = fps;
    }
    if let Some(dir) = cli.static_dir {
        config.static_dir = dir;
    }
    config.validate()?;
    Ok(config)
}

/// [`parse_cli_with`] using the file named by `HURO_TELEOP_CONFIG`, if set.
pub fn parse_cli<I, T>(args: I) -> Result<Config, ConfigError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let env_file = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
    parse_cli_with(args, env_file.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn parse(args: &[&str]) -> Result<Config, ConfigError> {
        parse_cli_with(std::iter::once("huro-teleop").chain(args.iter().copied()), None)
    }

    #[test]
    fn defaults() {
        let c = parse(&[]).unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.port, 9090);
        assert_eq!(c.tick_hz, 20);
        assert_eq!((c.render.width, c.render.height, c.render.fps), (320, 240, 15));
    }

    #[test]
    fn flags_override() {
        let c = parse(&[
            "--port", "8080", "--tick-hz", "50", "--cam-width", "640", "--cam-height", "480",
            "--cam-fps", "30", "--course", "c.json", "--static-dir", "web",
        ])
        .unwrap();
        assert_eq!(c.port, 8080);
        assert_eq!(c.tick_hz, 50);
        assert_eq!((c.render.width, c.render.height, c.render.fps), (640, 480, 30));
        assert_eq!(c.course_path, Some(PathBuf::from("c.json")));
        assert_eq!(c.static_dir, PathBuf::from("web"));
    }

    #[test]
    fn rejects_bad_values_and_flags() {
        assert!(matches!(parse(&["--tick-hz", "0"]), Err(ConfigError::InvalidValue(_))));
        assert!(matches!(parse(&["--tick-hz", "101"]), Err(ConfigError::InvalidValue(_))));
        assert!(matches!(parse(&["--port", "0"]), Err(ConfigError::InvalidValue(_))));
        assert!(matches!(parse(&["--port", "http"]), Err(ConfigError::InvalidValue(_))));
        assert!(matches!(parse(&["--cam-fps", "31"]), Err(ConfigError::InvalidValue(_))));
        let err = parse(&["--turbo"]).unwrap_err();
        assert_eq!(err, ConfigError::UnknownFlag("--turbo".into()));
        assert_ne!(err.exit_code(), 0);
        assert_eq!(parse(&["--help"]).unwrap_err().exit_code(), 0);
    }

    #[test]
    fn cli_wins_over_file_over_defaults() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"port": 7000, "tick_hz": 10, "render": {{"fps": 5}}}}"#).unwrap();
        let c = parse_cli_with(["huro-teleop", "--port", "7001"], Some(f.path())).unwrap();
        assert_eq!(c.port, 7001);
        assert_eq!(c.tick_hz, 10);
        assert_eq!(c.render.fps, 5);
        assert_eq!(c.render.width, 320);

        let mut bad = tempfile::NamedTempFile::new().unwrap();
        write!(bad, r#"{{"tick_hz": 0}}"#).unwrap();
        assert!(matches!(
            parse_cli_with(["huro-teleop"], Some(bad.path())),
            Err(ConfigError::InvalidValue(_))
        ));
        assert!(matches!(
            parse_cli_with(["huro-teleop"], Some(Path::new("/nonexistent/cfg.json"))),
            Err(ConfigError::File { .. })
        ));
    }
}
