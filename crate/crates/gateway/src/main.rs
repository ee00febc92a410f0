use std::process::ExitCode;

use huro_gateway::config::parse_cli;
use huro_gateway::server::{self, Ticking};
use huro_teleop::world::{load_course, CourseMap};
use tokio::net::TcpListener;
use tracing_subscriber::EnvFilter;

fn main() -> ExitCode {
    let config = match parse_cli(std::env::args_os()) {
        Ok(c) => c,
        Err(e) => {
            if e.exit_code() == 0 {
                print!("{e}");
            } else {
                eprintln!("huro-teleop: {e}");
            }
            return ExitCode::from(e.exit_code() as u8);
        }
    };

    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();

    let map = match &config.course_path {
        Some(path) => match std::fs::read(path).map_err(|e| e.to_string()).and_then(|b| {
            load_course(&b).map_err(|e| e.to_string())
        }) {
            Ok(m) => m,
            Err(e) => {
                eprintln!("huro-teleop: cannot load course {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        None => CourseMap::default(),
    };

    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("huro-teleop: {e}");
            return ExitCode::FAILURE;
        }
    };
    rt.block_on(async move {
        let addr = format!("{}:{}", config.host, config.port);
        let listener = match TcpListener::bind(&addr).await {
            Ok(l) => l,
            Err(e) => {
                eprintln!("huro-teleop: cannot bind {addr}: {e}");
                return ExitCode::FAILURE;
            }
        };
        let handle = server::spawn(&config, map, Ticking::Realtime { hz: config.tick_hz });
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        match server::serve(listener, handle, shutdown).await {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("huro-teleop: {e}");
                ExitCode::FAILURE
            }
        }
    })
}
