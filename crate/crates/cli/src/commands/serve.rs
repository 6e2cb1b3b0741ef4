use std::io::Write;
use std::path::Path;

use influence_annotate::http::router;
use influence_annotate::{read_profiles, spawn_controller, system_clock, Service, ServiceConfig, TargetProfile};

use crate::args::ServeArgs;
use crate::config::RunConfig;
use crate::error::{data, Result};
use crate::output::open_input;

fn profiles(path: &Path) -> Result<Vec<TargetProfile>> {
    read_profiles(open_input(path)?).map_err(|e| data(format!("{}: {e}", path.display())))
}

pub fn serve_cmd(args: &ServeArgs, cfg: &RunConfig) -> Result<()> {
    let s = &cfg.service;
    let config = ServiceConfig {
        log_path: args.log.clone(),
        seed: cfg.seed,
        lambda: cfg.ranking_lambda()?,
        ban_threshold: s.ban_threshold,
        lease_timeout_secs: s.lease_timeout_secs,
        batch_size: s.batch_size,
        parallelism: s.parallelism,
    };
    let service = Service::open(config, profiles(&args.targets)?, profiles(&args.proxies)?, system_clock())?;
    if let Some(runs) = args.runs {
        let have = service.status().runs_requested;
        if runs > have {
            service.request_runs(runs - have)?;
        }
    }
    spawn_controller(&service);

    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let app = router(service.clone(), args.admin_token.clone());
    let result: std::io::Result<()> = runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port)).await?;
        let addr = listener.local_addr()?;
        println!("listening on http://{addr}");
        std::io::stdout().flush()?;
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    });
    service.shutdown();
    result?;
    Ok(())
}
